//! `spectrum`: sorted eigenvalues with sector labels and fitted power-law references.

use anisokrr::covariance::CovarianceSpec;
use anisokrr::spectral::{full_spectrum, spectral_gaps_from, GapReport, Sector, SectorMap, SpectrumEntry};

use crate::config::SpectrumSettings;
use crate::output::{float, Table};
use crate::CliError;

pub struct SpectrumTable {
    pub alpha: f64,
    pub spectrum: Vec<SpectrumEntry>,
    /// Fitted-constant prediction and sector for each rank.
    pub predicted: Vec<(f64, Sector)>,
    pub gaps: Vec<GapReport>,
}

/// Predictions from [`SectorMap`] carry no constants; each block gets one
/// constant fitted in log space over its positive eigenvalues.
fn fitted_predictions(map: &SectorMap, spectrum: &[SpectrumEntry]) -> Result<Vec<(f64, Sector)>, CliError> {
    let shape = (1..=spectrum.len()).map(|m| map.predict(m)).collect::<Result<Vec<_>, _>>()?;
    let mut out = shape.clone();
    for b in &map.blocks {
        let (mut sum, mut count) = (0.0, 0usize);
        for m in b.start..=b.end {
            let (p, _) = shape[m - 1];
            let lam = spectrum[m - 1].lambda;
            if p > 0.0 && lam > 0.0 {
                sum += (lam / p).ln();
                count += 1;
            }
        }
        let c = if count > 0 { (sum / count as f64).exp() } else { 0.0 };
        for m in b.start..=b.end {
            out[m - 1].0 = shape[m - 1].0 * c;
        }
    }
    Ok(out)
}

pub fn spectrum_tables(s: &SpectrumSettings) -> Result<Vec<SpectrumTable>, CliError> {
    s.alphas
        .iter()
        .map(|&alpha| {
            let cov = CovarianceSpec::build(s.d, alpha)?;
            let spectrum = full_spectrum(&s.kernel, &cov)?;
            let map = SectorMap::build(&s.kernel, &cov, &spectrum)?;
            let predicted = fitted_predictions(&map, &spectrum)?;
            let gaps = spectral_gaps_from(&s.kernel, &cov, &spectrum);
            Ok(SpectrumTable { alpha, spectrum, predicted, gaps })
        })
        .collect()
}

pub fn cmd_spectrum(s: &SpectrumSettings) -> Result<Table, CliError> {
    let mut table = Table::new(
        "spectrum",
        s.seed,
        s.echo(),
        vec!["alpha", "rank", "beta", "degree", "lambda", "predicted_lambda", "sector"],
    );
    for t in spectrum_tables(s)? {
        for g in &t.gaps {
            table.note(
                "gap",
                format!(
                    "alpha={} level={} predicted_finite_d={} predicted_asymptotic={} empirical_ratio={}",
                    t.alpha,
                    g.level,
                    g.predicted_finite_d,
                    g.predicted_asymptotic.map_or("na".to_string(), |b| b.to_string()),
                    g.empirical_ratio.map_or("na".to_string(), float),
                ),
            );
        }
        for (rank, (e, (pred, sector))) in t.spectrum.iter().zip(&t.predicted).enumerate() {
            table.push(vec![
                float(t.alpha),
                (rank + 1).to_string(),
                e.beta.to_string(),
                e.degree.to_string(),
                float(e.lambda),
                float(*pred),
                sector.to_string(),
            ]);
        }
    }
    Ok(table)
}
