//! CSV output: a `#` header block followed by a plain comma-separated table.

use crate::config::Config;
use crate::CliError;

pub const TOOL: &str = concat!("anisokrr ", env!("CARGO_PKG_VERSION"));

/// Round-trippable float with 17 significant digits.
pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub struct Table {
    family: &'static str,
    master_seed: u64,
    config: Config,
    notes: Vec<String>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(family: &'static str, master_seed: u64, config: Config, columns: Vec<&'static str>) -> Self {
        Table { family, master_seed, config, notes: Vec::new(), columns, rows: Vec::new() }
    }

    /// Extra `# key: value` header line.
    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.notes.push(format!("{key}: {value}"));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> Result<String, CliError> {
        let mut out = String::new();
        out.push_str(&format!("# tool: {TOOL}\n"));
        out.push_str(&format!("# family: {}\n", self.family));
        out.push_str(&format!("# master_seed: {}\n", self.master_seed));
        for line in self.config.to_toml().lines() {
            out.push_str(&format!("# config: {line}\n"));
        }
        for n in &self.notes {
            out.push_str(&format!("# {n}\n"));
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).map_err(|e| CliError::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| CliError::Io(e.to_string()))?;
        }
        let body = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        out.push_str(std::str::from_utf8(&body).expect("utf-8 fields"));
        Ok(out)
    }
}

/// Splits rendered output into header lines and CSV records.
pub fn split_csv(text: &str) -> (Vec<&str>, Vec<Vec<String>>) {
    let header: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    let body: String = text.lines().skip(header.len()).map(|l| format!("{l}\n")).collect();
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(body.as_bytes());
    let records = r
        .records()
        .map(|rec| rec.expect("well-formed csv").iter().map(str::to_string).collect())
        .collect();
    (header, records)
}
