//! Command-line front end: spectra, risk curves and validation suites.

pub mod config;
pub mod output;
pub mod risk;
pub mod spectrum;
pub mod validate;

use clap::{Args, Parser, Subcommand};

use config::{Config, RiskSettings, SpectrumSettings};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Budget { estimate: f64, budget: f64 },
    Io(String),
    Core(anisokrr::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Budget { estimate, budget } => write!(
                f,
                "estimated runtime {estimate:.0} s exceeds the budget of {budget:.0} s; pass --budget {:.0} or more to run it",
                estimate.ceil()
            ),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<anisokrr::Error> for CliError {
    fn from(e: anisokrr::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "anisokrr", version, about = "Kernel spectra and KRR risk on anisotropic Gaussian data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sorted kernel spectrum with sector labels, as CSV.
    Spectrum(RunArgs),
    /// Monte-Carlo excess-risk curves with theory predictions, as CSV.
    Risk(RunArgs),
    /// Run an oracle suite and print a JSON report.
    Validate {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(validate::SUITES))]
        suite: String,
    },
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// Named preset: fig2-left, fig2-right, fig3, fig4.
    #[arg(long)]
    pub preset: Option<String>,
    /// TOML config file, applied over the preset.
    #[arg(long)]
    pub config: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Repeatable.
    #[arg(long)]
    pub alpha: Vec<f64>,
    /// Kernel <x,x'>^D.
    #[arg(long, group = "kernel")]
    pub monomial: Option<usize>,
    /// Kernel Σ h_k <x,x'>^k.
    #[arg(long, group = "kernel", value_name = "h0,h1,...")]
    pub poly: Option<String>,
    /// Hermite kernel with level weights ξ_k.
    #[arg(long, group = "kernel", value_name = "x0,x1,...")]
    pub hermite: Option<String>,
    /// exp(<x,x'>) truncated at degree D.
    #[arg(long, group = "kernel")]
    pub exp_trunc: Option<usize>,
    /// Repeatable.
    #[arg(long)]
    pub n: Vec<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// first, last or custom:j:p:c,... (repeatable).
    #[arg(long)]
    pub target: Vec<String>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long, value_parser = ["default", "literal"])]
    pub theory_mode: Option<String>,
    #[arg(long)]
    pub delta0: Option<f64>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<String>,
    /// Runtime budget in seconds for `risk`.
    #[arg(long)]
    pub budget: Option<f64>,
}

fn non_empty<T: Clone>(v: &[T]) -> Option<Vec<T>> {
    (!v.is_empty()).then(|| v.to_vec())
}

impl RunArgs {
    fn flags(&self) -> Config {
        let kernel = self
            .monomial
            .map(|d| format!("monomial:{d}"))
            .or_else(|| self.poly.as_ref().map(|p| format!("poly:{p}")))
            .or_else(|| self.hermite.as_ref().map(|p| format!("hermite:{p}")))
            .or_else(|| self.exp_trunc.map(|d| format!("exp-trunc:{d}")));
        Config {
            command: None,
            d: self.d,
            alpha: non_empty(&self.alpha),
            kernel,
            n: non_empty(&self.n),
            lambda: self.lambda,
            seeds: self.seeds,
            seed: self.seed,
            target: non_empty(&self.target),
            noise_sigma: self.noise_sigma,
            n_test: self.n_test,
            theory_mode: self.theory_mode.clone(),
            delta0: self.delta0,
            budget: self.budget,
        }
    }

    /// Preset, then config file, then flags.
    pub fn resolve(&self) -> Result<Config, CliError> {
        let mut cfg = match &self.preset {
            Some(p) => Config::preset(p)?,
            None => Config::default(),
        };
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
            cfg = cfg.overlay(Config::parse(&text, path)?);
        }
        Ok(cfg.overlay(self.flags()))
    }
}

/// What a command produced: text for `--out` or stdout, and the exit status.
pub struct Outcome {
    pub text: String,
    pub out: Option<String>,
    pub exit_code: i32,
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Spectrum(args) => {
            let settings = SpectrumSettings::resolve(&args.resolve()?)?;
            let text = spectrum::cmd_spectrum(&settings)?.render()?;
            Ok(Outcome { text, out: args.out.clone(), exit_code: 0 })
        }
        Command::Risk(args) => {
            let settings = RiskSettings::resolve(&args.resolve()?)?;
            let text = risk::cmd_risk(&settings)?.render()?;
            Ok(Outcome { text, out: args.out.clone(), exit_code: 0 })
        }
        Command::Validate { suite } => {
            let report = validate::run_suite(suite)?;
            let mut text = report.to_json();
            text.push('\n');
            Ok(Outcome { text, out: None, exit_code: if report.passed { 0 } else { 1 } })
        }
    }
}
