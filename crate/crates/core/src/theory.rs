//! Effective-risk prediction for Hermite-kernel ridge regression:
//! Low/High frequency split, diagonal shrinkage and the degree cap `D(κ)`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::multiindex::{factorial, MultiIndex};
use crate::smoothcount::{collect_low_set, degree_cap, ln_low_threshold, regime_violations};
use crate::spectral::{hermite_eigenvalue, KernelSpec};

/// Sample size `n = d^κ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Regime {
    pub d: usize,
    pub n: f64,
    pub kappa: f64,
}

impl Regime {
    pub fn from_samples(n: usize, d: usize) -> Result<Self> {
        if n == 0 || d < 2 {
            return Err(Error::InvalidArgument(format!("need n >= 1 and d >= 2, got n={n}, d={d}")));
        }
        Ok(Regime { d, n: n as f64, kappa: (n as f64).ln() / (d as f64).ln() })
    }

    pub fn from_kappa(kappa: f64, d: usize) -> Result<Self> {
        if !(kappa > 0.0) || d < 2 {
            return Err(Error::InvalidArgument(format!("need kappa > 0 and d >= 2, got kappa={kappa}, d={d}")));
        }
        Ok(Regime { d, n: (d as f64).powf(kappa), kappa })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FrequencyPartition {
    /// Canonically ordered `β` with `|β| ≤ L` and `σ^β > d^{-(κ+δ0)}`.
    pub low: Vec<MultiIndex>,
    /// Kernel eigenvalues of the `low` entries.
    pub low_eigen: Vec<f64>,
    pub low_mass: f64,
    /// `Σ_{β ∈ High} λ_β` over `|β| ≤ L`.
    pub high_mass: f64,
    pub kappa: f64,
    pub delta0: f64,
    pub n: f64,
    pub ln_threshold: f64,
    pub d_kappa: Option<usize>,
    pub truncation: usize,
    pub warnings: Vec<String>,
}

impl FrequencyPartition {
    pub fn contains(&self, beta: &MultiIndex) -> bool {
        self.low.binary_search(beta).is_ok()
    }

    pub fn max_low_degree(&self) -> usize {
        self.low.iter().map(|b| b.degree()).max().unwrap_or(0)
    }
}

/// Splits the Hermite-kernel index set at `σ^β > d^{-(κ+δ0)}`.
///
/// Regime violations (`κ` integer, `D(κ)(1-α) = κ`, `α ∉ [0,1)`) are
/// recorded as warnings rather than errors.
pub fn partition(cov: &CovarianceSpec, spec: &KernelSpec, regime: &Regime, delta0: f64) -> Result<FrequencyPartition> {
    if !spec.is_hermite() {
        return Err(Error::InvalidArgument("the frequency partition is defined for the Hermite kernel".into()));
    }
    if regime.d != cov.d() {
        return Err(Error::DimensionMismatch { expected: cov.d(), got: regime.d });
    }
    let mut warnings = Vec::new();
    let d_kappa = match cov.alpha() {
        Some(a) => {
            warnings.extend(regime_violations(a, regime.kappa));
            (a < 1.0).then(|| degree_cap(regime.kappa, a))
        }
        None => {
            warnings.push("covariance has no power-law exponent; D(kappa) undefined".into());
            None
        }
    };
    let ln_threshold = ln_low_threshold(cov.d(), regime.kappa, delta0);
    let low = collect_low_set(cov, ln_threshold, spec.degree());
    let low_eigen = low
        .iter()
        .map(|b| hermite_eigenvalue(b, spec.coeffs(), cov))
        .collect::<Result<Vec<_>>>()?;
    let low_mass: f64 = low_eigen.iter().sum();
    // each level of the Hermite spectrum sums to ξ_k (unit trace)
    let total: f64 = spec.coeffs().iter().sum();
    let high_mass = (total - low_mass).max(0.0);
    let part = FrequencyPartition {
        low,
        low_eigen,
        low_mass,
        high_mass,
        kappa: regime.kappa,
        delta0,
        n: regime.n,
        ln_threshold,
        d_kappa,
        truncation: spec.degree(),
        warnings,
    };
    let mut part = part;
    if let Some(cap) = d_kappa {
        if part.max_low_degree() > cap {
            part.warnings.push(format!("Low contains degree {} above D(kappa) = {cap}", part.max_low_degree()));
        }
    }
    Ok(part)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
pub enum TheoryMode {
    /// `D_ββ = λ_β`, effective ridge `λ + Σ_High λ_β`.
    #[default]
    Default,
    /// `D_ββ = ξ_|β| |β|! σ^β / r0^|β|`, effective ridge `λ + (λ + Σ_High λ_β)`.
    Literal,
}

impl fmt::Display for TheoryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TheoryMode::Default => "default",
            TheoryMode::Literal => "literal",
        })
    }
}

impl FromStr for TheoryMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(TheoryMode::Default),
            "literal" => Ok(TheoryMode::Literal),
            other => Err(Error::InvalidArgument(format!("unknown theory mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
pub enum HighResidual {
    /// Add `Σ_High (f*_β)^2` only when the target has High components.
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Clone, Debug, Serialize)]
pub struct EffectiveRiskPrediction {
    /// `(β, s_β)` for every `β ∈ Low`.
    pub shrinkage: Vec<(MultiIndex, f64)>,
    pub sigma_eff: f64,
    /// Ridge actually used in `s_β = (1 + γ/(n D_ββ))^{-1}`.
    pub gamma: f64,
    pub low_risk: f64,
    pub high_residual: f64,
    pub predicted_risk: f64,
    pub mode: TheoryMode,
    pub high_residual_applied: bool,
}

/// Squared `L²` risk predicted for the target with Hermite coefficients `target`.
pub fn effective_risk(
    part: &FrequencyPartition,
    target: &[(MultiIndex, f64)],
    n: f64,
    lambda: f64,
    spec: &KernelSpec,
    cov: &CovarianceSpec,
    mode: TheoryMode,
    high: HighResidual,
) -> Result<EffectiveRiskPrediction> {
    if !(n > 0.0 && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("need n > 0 and lambda >= 0, got n={n}, lambda={lambda}")));
    }
    let sigma_eff = lambda + part.high_mass;
    let gamma = match mode {
        TheoryMode::Default => sigma_eff,
        TheoryMode::Literal => lambda + sigma_eff,
    };
    let r0 = cov.r0();
    let mut shrinkage = Vec::with_capacity(part.low.len());
    for (beta, &eig) in part.low.iter().zip(&part.low_eigen) {
        let diag = match mode {
            TheoryMode::Default => eig,
            TheoryMode::Literal => {
                let k = beta.degree();
                spec.coeffs()[k] * factorial(k)? as f64 * beta.power(cov.sigma()) / r0.powi(k as i32)
            }
        };
        if !(diag > 0.0) {
            return Err(Error::ZeroDiagonal { beta: beta.to_string(), level: beta.degree() });
        }
        shrinkage.push((beta.clone(), 1.0 / (1.0 + gamma / (n * diag))));
    }
    let mut low_risk = 0.0;
    let mut high_residual = 0.0;
    for (beta, c) in target {
        match part.low.binary_search(beta) {
            Ok(i) => low_risk += (1.0 - shrinkage[i].1).powi(2) * c * c,
            Err(_) => high_residual += c * c,
        }
    }
    let applied = match high {
        HighResidual::On => true,
        HighResidual::Off => false,
        HighResidual::Auto => high_residual > 0.0,
    };
    Ok(EffectiveRiskPrediction {
        shrinkage,
        sigma_eff,
        gamma,
        low_risk,
        high_residual,
        predicted_risk: low_risk + if applied { high_residual } else { 0.0 },
        mode,
        high_residual_applied: applied,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeCheck {
    pub d_kappa: Option<usize>,
    pub max_low_degree: usize,
    pub cap_holds: bool,
    /// Up to five `β ∈ Low` with `|β| = D(κ)`.
    pub witnesses: Vec<MultiIndex>,
}

pub fn predictor_degree_check(part: &FrequencyPartition) -> DegreeCheck {
    let max_low_degree = part.max_low_degree();
    let witnesses = match part.d_kappa {
        Some(cap) => part.low.iter().filter(|b| b.degree() == cap).take(5).cloned().collect(),
        None => Vec::new(),
    };
    DegreeCheck {
        d_kappa: part.d_kappa,
        max_low_degree,
        cap_holds: part.d_kappa.map_or(true, |cap| max_low_degree <= cap),
        witnesses,
    }
}

/// Sample size at which `β` enters Low: the `n = d^κ` with `σ^β = d^{-(κ+δ0)}`,
/// i.e. `σ^{-β} d^{-δ0}`.
pub fn entry_threshold(cov: &CovarianceSpec, beta: &MultiIndex, delta0: f64) -> f64 {
    (-beta.ln_power(&cov.ln_sigma()) - delta0 * (cov.d() as f64).ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::loglog_slope;
    use crate::multiindex::enumerate;
    use approx::assert_relative_eq;

    fn hermite3() -> KernelSpec {
        KernelSpec::hermite(vec![1.0; 4]).unwrap()
    }

    fn part(d: usize, alpha: f64, kappa: f64, delta0: f64) -> FrequencyPartition {
        let c = CovarianceSpec::build(d, alpha).unwrap();
        partition(&c, &hermite3(), &Regime::from_kappa(kappa, d).unwrap(), delta0).unwrap()
    }

    #[test]
    fn partition_examples() {
        let p = part(100, 0.0, 1.5, 0.1);
        assert_eq!(p.low.len(), 101);
        assert_eq!(p.d_kappa, Some(1));
        assert!(p.warnings.is_empty());
        // everything passes: High is empty
        let p = part(10, 0.0, 3.5, 0.1);
        assert_eq!(p.low.len(), 286);
        assert!(p.high_mass.abs() < 1e-12);
        let p = part(100, 0.5, 1.2, 0.05);
        assert_eq!(p.d_kappa, Some(2));
        assert!(predictor_degree_check(&p).cap_holds);
    }

    #[test]
    fn partition_is_exact_split() {
        let c = CovarianceSpec::build(30, 0.6).unwrap();
        let spec = hermite3();
        let p = partition(&c, &spec, &Regime::from_kappa(1.3, 30).unwrap(), 0.05).unwrap();
        let ln = c.ln_sigma();
        let mut high_mass = 0.0;
        for b in enumerate(30, 3).unwrap() {
            let inside = b.ln_power(&ln) > p.ln_threshold;
            assert_eq!(p.contains(&b), inside);
            if !inside {
                high_mass += hermite_eigenvalue(&b, spec.coeffs(), &c).unwrap();
            }
        }
        assert!((high_mass - p.high_mass).abs() < 1e-10);
    }

    #[test]
    fn regime_warnings_do_not_abort() {
        let p = part(100, 0.5, 2.0, 0.05);
        assert!(!p.warnings.is_empty());
        let p = part(100, 0.5, 1.5, 0.05);
        assert!(p.warnings.iter().any(|w| w.contains("D(kappa)")));
    }

    #[test]
    fn degree_examples() {
        let p = part(100, 0.0, 1.5, 0.05);
        let chk = predictor_degree_check(&p);
        assert_eq!((chk.max_low_degree, chk.d_kappa), (1, Some(1)));
        assert!(!chk.witnesses.is_empty());

        let c = CovarianceSpec::build(100, 0.9).unwrap();
        assert_eq!(degree_cap(1.5, 0.9), 15);
        let e15 = MultiIndex::unit(100, 1, 15).unwrap();
        let low = collect_low_set(&c, ln_low_threshold(100, 1.5, 0.1), 15);
        let expected = 15.0 * c.sigma()[0].ln() > -1.6 * 100f64.ln();
        assert_eq!(low.binary_search(&e15).is_ok(), expected);
    }

    #[test]
    fn example_one_threshold() {
        // 2 e_1 in Low iff κ + δ0 > 2 log_d(1/σ_1)
        let c = CovarianceSpec::build(100, 0.4).unwrap();
        let b = MultiIndex::unit(100, 1, 2).unwrap();
        let crit = 2.0 * (1.0 / c.sigma()[0]).ln() / 100f64.ln();
        for &kappa in &[crit - 0.2, crit - 0.01, crit + 0.01, crit + 0.2] {
            let p = partition(&c, &hermite3(), &Regime::from_kappa(kappa, 100).unwrap(), 0.05).unwrap();
            assert_eq!(p.contains(&b), kappa + 0.05 > crit);
        }
    }

    #[test]
    fn effective_risk_limits() {
        let c = CovarianceSpec::build(100, 0.9).unwrap();
        let spec = hermite3();
        let p = partition(&c, &spec, &Regime::from_kappa(1.7, 100).unwrap(), 0.05).unwrap();
        let r = effective_risk(&p, &[], 1e4, 0.01, &spec, &c, TheoryMode::Default, HighResidual::Off).unwrap();
        assert_eq!(r.predicted_risk, 0.0);
        let target: Vec<(MultiIndex, f64)> = (1..=3).map(|k| (MultiIndex::unit(100, 1, k).unwrap(), 1.0)).collect();
        assert!(target.iter().all(|(b, _)| p.contains(b)));
        let r = effective_risk(&p, &target, 1e15, 0.01, &spec, &c, TheoryMode::Default, HighResidual::Auto).unwrap();
        assert!(r.predicted_risk < 1e-9);
        assert!(!r.high_residual_applied);
        for (_, s) in &r.shrinkage {
            assert!(*s > 0.0 && *s <= 1.0);
        }
    }

    #[test]
    fn high_targets_add_residual() {
        let c = CovarianceSpec::build(100, 0.9).unwrap();
        let spec = hermite3();
        let p = partition(&c, &spec, &Regime::from_kappa(1.2, 100).unwrap(), 0.05).unwrap();
        let b = MultiIndex::unit(100, 100, 3).unwrap();
        assert!(!p.contains(&b));
        let t = [(b, 2.0)];
        let on = effective_risk(&p, &t, 300.0, 0.01, &spec, &c, TheoryMode::Default, HighResidual::Auto).unwrap();
        assert!(on.high_residual_applied);
        assert_relative_eq!(on.predicted_risk, 4.0);
        let off = effective_risk(&p, &t, 300.0, 0.01, &spec, &c, TheoryMode::Default, HighResidual::Off).unwrap();
        assert_eq!(off.predicted_risk, 0.0);
    }

    #[test]
    fn zero_diagonal_is_an_error() {
        let c = CovarianceSpec::build(20, 0.3).unwrap();
        let spec = KernelSpec::hermite(vec![1.0, 0.0, 1.0]).unwrap();
        let p = partition(&c, &spec, &Regime::from_kappa(1.5, 20).unwrap(), 0.05).unwrap();
        let r = effective_risk(&p, &[], 100.0, 0.1, &spec, &c, TheoryMode::Default, HighResidual::Auto);
        assert!(matches!(r, Err(Error::ZeroDiagonal { level: 1, .. })));
    }

    #[test]
    fn shrinkage_follows_diagonal() {
        let c = CovarianceSpec::build(50, 0.5).unwrap();
        let spec = hermite3();
        let p = partition(&c, &spec, &Regime::from_kappa(1.6, 50).unwrap(), 0.05).unwrap();
        for mode in [TheoryMode::Default, TheoryMode::Literal] {
            let r = effective_risk(&p, &[], 500.0, 0.01, &spec, &c, mode, HighResidual::Auto).unwrap();
            let mut pairs: Vec<(f64, f64)> = p.low_eigen.iter().zip(&r.shrinkage).map(|(e, (_, s))| (*e, *s)).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if mode == TheoryMode::Default {
                assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
            }
        }
    }

    #[test]
    fn low_grows_with_kappa() {
        let mut prev = 0;
        for &kappa in &[0.7, 1.1, 1.45, 1.8, 2.2, 2.6] {
            let n = part(60, 0.5, kappa, 0.05).low.len();
            assert!(n >= prev);
            prev = n;
        }
    }

    #[test]
    fn isotropic_low_is_degree_truncation() {
        for &kappa in &[0.5, 1.3, 2.4] {
            let p = part(40, 0.0, kappa, 0.05);
            let k = kappa.floor() as usize;
            assert!(p.low.iter().all(|b| b.degree() <= k));
            assert_eq!(p.low.len() as u128, crate::multiindex::count_up_to(40, k).unwrap());
        }
    }

    #[test]
    fn alignment_dichotomy_thresholds() {
        let ds = [100usize, 1000, 10_000];
        for &alpha in &[0.2, 0.5, 0.8] {
            let first: Vec<f64> = ds
                .iter()
                .map(|&d| {
                    let c = CovarianceSpec::build(d, alpha).unwrap();
                    entry_threshold(&c, &MultiIndex::unit(d, 1, 2).unwrap(), 0.0)
                })
                .collect();
            let last: Vec<f64> = ds
                .iter()
                .map(|&d| {
                    let c = CovarianceSpec::build(d, alpha).unwrap();
                    entry_threshold(&c, &MultiIndex::unit(d, d, 2).unwrap(), 0.0)
                })
                .collect();
            let r0s: Vec<f64> = ds.iter().map(|&d| CovarianceSpec::build(d, alpha).unwrap().r0().powi(2)).collect();
            for (a, b) in first.iter().zip(&r0s) {
                assert_relative_eq!(*a, *b, max_relative = 1e-9);
            }
            let fd: Vec<f64> = ds.iter().map(|&d| d as f64).collect();
            let slope = loglog_slope(&fd, &last).unwrap();
            assert!((slope - 2.0).abs() < 0.2, "alpha={alpha} slope={slope}");
        }
    }
}
