//! Experiment configuration: TOML files, named presets and flag overrides.

use anisokrr::experiment::RiskGrid;
use anisokrr::krr::TargetKind;
use anisokrr::spectral::KernelSpec;
use anisokrr::theory::TheoryMode;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every key a config file may set. Unset keys fall back to command defaults.
#[derive(Clone, Debug, Default, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_test: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theory_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

pub const PRESETS: &[(&str, &str)] = &[
    ("fig2-left", include_str!("../presets/fig2-left.toml")),
    ("fig2-right", include_str!("../presets/fig2-right.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
];

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            CliError::Config(format!("unknown preset {name:?}; known: {}", known.join(", ")))
        })?;
        Self::parse(text, &format!("preset {name}"))
    }

    /// Keys set in `top` win.
    pub fn overlay(self, top: Config) -> Config {
        Config {
            command: top.command.or(self.command),
            d: top.d.or(self.d),
            alpha: top.alpha.or(self.alpha),
            kernel: top.kernel.or(self.kernel),
            n: top.n.or(self.n),
            lambda: top.lambda.or(self.lambda),
            seeds: top.seeds.or(self.seeds),
            seed: top.seed.or(self.seed),
            target: top.target.or(self.target),
            noise_sigma: top.noise_sigma.or(self.noise_sigma),
            n_test: top.n_test.or(self.n_test),
            theory_mode: top.theory_mode.or(self.theory_mode),
            delta0: top.delta0.or(self.delta0),
            budget: top.budget.or(self.budget),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain config serializes")
    }

    fn check_command(&self, expected: &str) -> Result<(), CliError> {
        match &self.command {
            Some(c) if c != expected => {
                Err(CliError::Config(format!("config is for command {c:?}, not {expected:?}")))
            }
            _ => Ok(()),
        }
    }
}

/// `monomial:D`, `poly:h0,h1,...`, `exp-trunc:D` or `hermite:x0,x1,...`.
pub fn parse_kernel(s: &str) -> Result<KernelSpec, CliError> {
    let bad = |m: String| CliError::Config(format!("kernel {s:?}: {m}"));
    let (kind, body) = s.split_once(':').ok_or_else(|| bad("expected kind:parameters".into()))?;
    let list = || -> Result<Vec<f64>, CliError> {
        body.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad(format!("{v:?} is not a number"))))
            .collect()
    };
    let degree = || body.trim().parse::<usize>().map_err(|_| bad(format!("{body:?} is not a degree")));
    let spec = match kind {
        "monomial" => KernelSpec::monomial(degree()?),
        "exp-trunc" => KernelSpec::exp_truncated(degree()?),
        "poly" => KernelSpec::polynomial(list()?)?,
        "hermite" => KernelSpec::hermite(list()?)?,
        other => return Err(bad(format!("unknown kind {other:?}"))),
    };
    Ok(spec)
}

#[derive(Clone, Debug)]
pub struct SpectrumSettings {
    pub d: usize,
    pub alphas: Vec<f64>,
    pub kernel: KernelSpec,
    pub seed: u64,
}

fn required<T>(v: Option<T>, key: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
}

impl SpectrumSettings {
    pub fn resolve(cfg: &Config) -> Result<Self, CliError> {
        cfg.check_command("spectrum")?;
        let alphas = required(cfg.alpha.clone(), "alpha")?;
        if alphas.is_empty() {
            return Err(CliError::Config("`alpha` must list at least one value".into()));
        }
        Ok(SpectrumSettings {
            d: required(cfg.d, "d")?,
            alphas,
            kernel: parse_kernel(&required(cfg.kernel.clone(), "kernel")?)?,
            seed: cfg.seed.unwrap_or(0),
        })
    }

    /// The resolved values, for the output header.
    pub fn echo(&self) -> Config {
        Config {
            command: Some("spectrum".into()),
            d: Some(self.d),
            alpha: Some(self.alphas.clone()),
            kernel: Some(self.kernel.label()),
            seed: Some(self.seed),
            ..Config::default()
        }
    }
}

pub const DEFAULT_BUDGET_SECONDS: f64 = 60.0;

#[derive(Clone, Debug)]
pub struct RiskSettings {
    pub grid: RiskGrid,
    pub budget: f64,
}

impl RiskSettings {
    pub fn resolve(cfg: &Config) -> Result<Self, CliError> {
        cfg.check_command("risk")?;
        let kernel = parse_kernel(cfg.kernel.as_deref().unwrap_or("hermite:1,1,1,1"))?;
        if !kernel.is_hermite() {
            return Err(CliError::Config("risk experiments need a `hermite:` kernel".into()));
        }
        let targets = cfg
            .target
            .clone()
            .unwrap_or_else(|| vec!["first".into()])
            .iter()
            .map(|t| TargetKind::parse(t))
            .collect::<Result<Vec<_>, _>>()?;
        let theory_mode: TheoryMode = cfg.theory_mode.as_deref().unwrap_or("default").parse()?;
        let grid = RiskGrid {
            d: cfg.d.unwrap_or(100),
            alphas: cfg.alpha.clone().unwrap_or_else(|| vec![0.0, 0.3, 0.6, 0.9]),
            ns: cfg.n.clone().unwrap_or_else(|| vec![25, 50, 100, 200, 400, 800, 1600, 3200]),
            lambda: cfg.lambda.unwrap_or(0.01),
            xi: kernel.coeffs().to_vec(),
            seeds: cfg.seeds.unwrap_or(10),
            master_seed: cfg.seed.unwrap_or(0),
            targets,
            noise_sigma: cfg.noise_sigma.unwrap_or(0.0),
            n_test: cfg.n_test.unwrap_or(2000),
            theory_mode,
            delta0: cfg.delta0.unwrap_or(0.05),
        };
        grid.validate()?;
        let budget = cfg.budget.unwrap_or(DEFAULT_BUDGET_SECONDS);
        if !(budget > 0.0) {
            return Err(CliError::Config(format!("budget must be positive, got {budget}")));
        }
        Ok(RiskSettings { grid, budget })
    }

    pub fn echo(&self) -> Config {
        let g = &self.grid;
        Config {
            command: Some("risk".into()),
            d: Some(g.d),
            alpha: Some(g.alphas.clone()),
            kernel: Some(KernelSpec::hermite(g.xi.clone()).expect("validated").label()),
            n: Some(g.ns.clone()),
            lambda: Some(g.lambda),
            seeds: Some(g.seeds),
            seed: Some(g.master_seed),
            target: Some(g.targets.iter().map(|t| t.label()).collect()),
            noise_sigma: Some(g.noise_sigma),
            n_test: Some(g.n_test),
            theory_mode: Some(g.theory_mode.to_string()),
            delta0: Some(g.delta0),
            budget: Some(self.budget),
        }
    }
}
