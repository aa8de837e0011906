//! Closed-form eigenvalues of inner-product and Hermite kernels, sorted
//! spectra, counting functions, gap classification and sector predictions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::multiindex::{self, factorial, MultiIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AnalyticFamily {
    /// `exp(t)`, `h_k = 1/k!`.
    Exp,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum KernelKind {
    /// `<x, x'>^D`
    Monomial,
    /// `Σ_k h_k <x, x'>^k`
    Polynomial,
    /// Taylor truncation of an analytic inner-product kernel.
    TruncatedAnalytic(AnalyticFamily),
    /// `Σ_β ξ_{|β|} multinomial(β) σ^β He_β(z) He_β(z')`
    Hermite,
}

/// A kernel identified by its level coefficients `h_0..h_D` (inner-product
/// kinds) or `ξ_0..ξ_L` (Hermite).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelSpec {
    kind: KernelKind,
    coeffs: Vec<f64>,
}

impl KernelSpec {
    fn new(kind: KernelKind, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("kernel needs at least one coefficient".into()));
        }
        if let Some(c) = coeffs.iter().find(|c| !(**c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidArgument(format!("kernel coefficients must be finite and >= 0, got {c}")));
        }
        Ok(KernelSpec { kind, coeffs })
    }

    pub fn monomial(degree: usize) -> Self {
        let mut coeffs = vec![0.0; degree + 1];
        coeffs[degree] = 1.0;
        KernelSpec { kind: KernelKind::Monomial, coeffs }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(KernelKind::Polynomial, coeffs)
    }

    pub fn exp_truncated(degree: usize) -> Self {
        let mut coeffs = Vec::with_capacity(degree + 1);
        let mut c = 1.0;
        for k in 0..=degree {
            if k > 0 {
                c /= k as f64;
            }
            coeffs.push(c);
        }
        KernelSpec { kind: KernelKind::TruncatedAnalytic(AnalyticFamily::Exp), coeffs }
    }

    pub fn hermite(xi: Vec<f64>) -> Result<Self> {
        Self::new(KernelKind::Hermite, xi)
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_hermite(&self) -> bool {
        self.kind == KernelKind::Hermite
    }

    /// Factor multiplying the `β`-dependent part of `λ_β` at level `k`:
    /// `h_k k!` for inner-product kernels, `ξ_k` for the Hermite kernel.
    pub fn level_weight(&self, k: usize) -> Result<f64> {
        let c = self.coeffs.get(k).copied().unwrap_or(0.0);
        if self.is_hermite() {
            Ok(c)
        } else {
            Ok(c * factorial(k)? as f64)
        }
    }

    /// Eigenvalue attached to `β`.
    pub fn eigenvalue(&self, beta: &MultiIndex, cov: &CovarianceSpec) -> Result<f64> {
        if self.is_hermite() {
            hermite_eigenvalue(beta, &self.coeffs, cov)
        } else {
            monomial_eigenvalue(beta, &self.coeffs, cov)
        }
    }

    pub fn label(&self) -> String {
        let list = |c: &[f64]| c.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",");
        match self.kind {
            KernelKind::Monomial => format!("monomial:{}", self.degree()),
            KernelKind::Polynomial => format!("poly:{}", list(&self.coeffs)),
            KernelKind::TruncatedAnalytic(AnalyticFamily::Exp) => format!("exp-trunc:{}", self.degree()),
            KernelKind::Hermite => format!("hermite:{}", list(&self.coeffs)),
        }
    }
}

fn check_dim(beta: &MultiIndex, cov: &CovarianceSpec) -> Result<()> {
    if beta.dim() != cov.d() {
        return Err(Error::DimensionMismatch { expected: cov.d(), got: beta.dim() });
    }
    Ok(())
}

/// `ξ_{|β|} multinomial(β) σ^β`, the Mercer eigenvalue of the Hermite kernel.
pub fn hermite_eigenvalue(beta: &MultiIndex, xi: &[f64], cov: &CovarianceSpec) -> Result<f64> {
    check_dim(beta, cov)?;
    let c = xi.get(beta.degree()).copied().unwrap_or(0.0);
    if c == 0.0 {
        return Ok(0.0);
    }
    Ok(c * beta.multinomial()? as f64 * beta.power(cov.sigma()))
}

/// `h_{|β|} |β|! σ^β`.
pub fn monomial_eigenvalue(beta: &MultiIndex, h: &[f64], cov: &CovarianceSpec) -> Result<f64> {
    check_dim(beta, cov)?;
    let c = h.get(beta.degree()).copied().unwrap_or(0.0);
    if c == 0.0 {
        return Ok(0.0);
    }
    Ok(c * factorial(beta.degree())? as f64 * beta.power(cov.sigma()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumEntry {
    pub beta: MultiIndex,
    pub lambda: f64,
    pub degree: usize,
}

/// Every `β` with `|β| ≤ D`, sorted by eigenvalue (descending) and then by
/// the canonical multi-index order. Zero-coefficient levels contribute zeros
/// at the tail.
pub fn full_spectrum(spec: &KernelSpec, cov: &CovarianceSpec) -> Result<Vec<SpectrumEntry>> {
    let betas = multiindex::enumerate(cov.d(), spec.degree())?;
    let weights = (0..=spec.degree()).map(|k| spec.level_weight(k)).collect::<Result<Vec<_>>>()?;
    let hermite = spec.is_hermite();
    let sigma = cov.sigma();
    let mut entries = betas
        .into_par_iter()
        .map(|beta| {
            let degree = beta.degree();
            let w = weights[degree];
            let lambda = if w == 0.0 {
                0.0
            } else if hermite {
                w * beta.multinomial()? as f64 * beta.power(sigma)
            } else {
                w * beta.power(sigma)
            };
            Ok(SpectrumEntry { beta, lambda, degree })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.par_sort_by(|a, b| b.lambda.total_cmp(&a.lambda).then_with(|| a.beta.cmp(&b.beta)));
    Ok(entries)
}

/// Entries with `λ ≥ eps` in a spectrum sorted by [`full_spectrum`].
pub fn count_at_least(spectrum: &[SpectrumEntry], eps: f64) -> usize {
    spectrum.partition_point(|e| e.lambda >= eps)
}

/// `M(ε) = |{β : λ_β ≥ ε}|`.
pub fn counting_m(spec: &KernelSpec, cov: &CovarianceSpec, eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    Ok(count_at_least(&full_spectrum(spec, cov)?, eps))
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub level: usize,
    /// `σ_d^ℓ > σ_1^{ℓ+1}`; for the power law this is `1/(r0^ℓ d^{αℓ}) > 1/r0^{ℓ+1}`.
    pub predicted_finite_d: bool,
    /// `α ≤ 1/(ℓ+1)`; `None` for covariances without an exponent.
    pub predicted_asymptotic: Option<bool>,
    /// `min λ at level ℓ / max λ at level ℓ+1`, when both levels carry mass.
    pub empirical_ratio: Option<f64>,
}

fn level_gap_predicted(cov: &CovarianceSpec, lower: usize, upper: usize) -> bool {
    let s = cov.sigma();
    let (s1, sd) = (s[0].ln(), s[s.len() - 1].ln());
    lower as f64 * sd > upper as f64 * s1
}

fn level_extremes(spectrum: &[SpectrumEntry], levels: usize) -> Vec<Option<(f64, f64)>> {
    let mut ext: Vec<Option<(f64, f64)>> = vec![None; levels];
    for e in spectrum.iter().filter(|e| e.lambda > 0.0) {
        let slot = &mut ext[e.degree];
        *slot = Some(match *slot {
            None => (e.lambda, e.lambda),
            Some((lo, hi)) => (lo.min(e.lambda), hi.max(e.lambda)),
        });
    }
    ext
}

/// Per-level gap classification for levels `0..D-1`.
pub fn spectral_gaps(spec: &KernelSpec, cov: &CovarianceSpec) -> Result<Vec<GapReport>> {
    let spectrum = full_spectrum(spec, cov)?;
    Ok(spectral_gaps_from(spec, cov, &spectrum))
}

pub fn spectral_gaps_from(spec: &KernelSpec, cov: &CovarianceSpec, spectrum: &[SpectrumEntry]) -> Vec<GapReport> {
    let ext = level_extremes(spectrum, spec.degree() + 1);
    (0..spec.degree())
        .map(|l| GapReport {
            level: l,
            predicted_finite_d: level_gap_predicted(cov, l, l + 1),
            predicted_asymptotic: cov.alpha().map(|a| a <= 1.0 / (l as f64 + 1.0)),
            empirical_ratio: match (ext[l], ext[l + 1]) {
                (Some((lo, _)), Some((_, hi))) => Some(lo / hi),
                _ => None,
            },
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sector {
    /// A level separated from its neighbours by gaps.
    Gap { level: usize },
    /// Band `j` of the continuous part: eigenvalues roughly in `[d^{-(j+1)}, d^{-j})`.
    Continuous { band: usize },
    /// Zero eigenvalues (levels with zero coefficient).
    Null,
}

impl std::fmt::Display for Sector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sector::Gap { level } => write!(f, "gap{level}"),
            Sector::Continuous { band } => write!(f, "cont{band}"),
            Sector::Null => f.write_str("null"),
        }
    }
}

/// A contiguous block of ranks `start..=end` (1-based) sharing one
/// prediction `(m - offset)^{-α} / r0^power`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectorBlock {
    pub sector: Sector,
    pub start: usize,
    pub end: usize,
    pub offset: usize,
    pub r0_power: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SectorMap {
    pub alpha: f64,
    pub r0: f64,
    pub blocks: Vec<SectorBlock>,
    pub len: usize,
}

impl SectorMap {
    /// Splits a sorted spectrum into gap sectors and continuous bands.
    ///
    /// Positive levels are walked upwards; a level is a gap sector while it
    /// and every level before it are separated from the next positive level.
    /// From the first unseparated level `c` on, the remaining positive
    /// eigenvalues are cut at `d^{-(j+1)}` into bands `j = c-1, ..., D-1`.
    pub fn build(spec: &KernelSpec, cov: &CovarianceSpec, spectrum: &[SpectrumEntry]) -> Result<Self> {
        let alpha = cov
            .alpha()
            .ok_or_else(|| Error::InvalidArgument("sector predictions need a power-law covariance".into()))?;
        let d = cov.d() as f64;
        let positive_levels: Vec<usize> = (0..=spec.degree())
            .filter(|&k| spec.level_weight(k).map(|w| w > 0.0).unwrap_or(false))
            .collect();
        let mut level_counts = vec![0usize; spec.degree() + 1];
        for e in spectrum.iter().filter(|e| e.lambda > 0.0) {
            level_counts[e.degree] += 1;
        }
        let positive_total: usize = level_counts.iter().sum();

        let mut blocks = Vec::new();
        let mut rank = 0usize;
        let mut continuous_from = None;
        for (i, &k) in positive_levels.iter().enumerate() {
            let separated = match positive_levels.get(i + 1) {
                Some(&next) => level_gap_predicted(cov, k, next),
                None => true,
            };
            if !separated {
                continuous_from = Some(k);
                break;
            }
            blocks.push(SectorBlock {
                sector: Sector::Gap { level: k },
                start: rank + 1,
                end: rank + level_counts[k],
                offset: rank,
                r0_power: k,
            });
            rank += level_counts[k];
        }
        if let Some(c) = continuous_from {
            let first_band = c.saturating_sub(1);
            let last_band = spec.degree().saturating_sub(1).max(first_band);
            let mut offset = rank;
            for j in first_band..=last_band {
                let end = if j == last_band {
                    positive_total
                } else {
                    let cut = d.powi(-(j as i32 + 1));
                    count_at_least(spectrum, cut).clamp(offset, positive_total)
                };
                if end > offset {
                    blocks.push(SectorBlock {
                        sector: Sector::Continuous { band: j },
                        start: offset + 1,
                        end,
                        offset,
                        r0_power: j + 1,
                    });
                }
                offset = end;
            }
        }
        if spectrum.len() > positive_total {
            blocks.push(SectorBlock {
                sector: Sector::Null,
                start: positive_total + 1,
                end: spectrum.len(),
                offset: positive_total,
                r0_power: 0,
            });
        }
        Ok(SectorMap { alpha, r0: cov.r0(), blocks, len: spectrum.len() })
    }

    pub fn block(&self, m: usize) -> Result<&SectorBlock> {
        if m == 0 || m > self.len {
            return Err(Error::RankOutOfRange { rank: m, size: self.len });
        }
        let i = self.blocks.partition_point(|b| b.end < m);
        Ok(&self.blocks[i])
    }

    /// Shape-only prediction for the `m`-th eigenvalue (1-based), with its sector.
    pub fn predict(&self, m: usize) -> Result<(f64, Sector)> {
        let b = self.block(m)?;
        if b.sector == Sector::Null {
            return Ok((0.0, Sector::Null));
        }
        let plus = (m - b.offset) as f64;
        Ok((plus.powf(-self.alpha) / self.r0.powi(b.r0_power as i32), b.sector))
    }
}

/// Convenience wrapper: builds the spectrum and sector map, then predicts rank `m`.
pub fn predicted_order(spec: &KernelSpec, cov: &CovarianceSpec, m: usize) -> Result<(f64, Sector)> {
    let spectrum = full_spectrum(spec, cov)?;
    SectorMap::build(spec, cov, &spectrum)?.predict(m)
}

/// Inner-product power series whose Taylor tail is measured by [`truncation_hs_error`].
#[derive(Clone, Debug, PartialEq)]
pub enum InnerProductSeries {
    Polynomial(Vec<f64>),
    Exp,
}

impl InnerProductSeries {
    /// `Σ_{k > D} h_k t^k`, summed directly so small tails are not lost to cancellation.
    pub fn tail(&self, degree: usize, t: f64) -> f64 {
        match self {
            InnerProductSeries::Polynomial(h) => h
                .iter()
                .enumerate()
                .skip(degree + 1)
                .map(|(k, c)| c * t.powi(k as i32))
                .sum(),
            InnerProductSeries::Exp => {
                let mut term = 1.0;
                for k in 1..=degree + 1 {
                    term *= t / k as f64;
                }
                let mut sum = 0.0;
                let mut k = degree + 1;
                while term != 0.0 && k < degree + 400 {
                    sum += term;
                    if term.abs() <= 1e-18 * sum.abs() {
                        break;
                    }
                    k += 1;
                    term *= t / k as f64;
                }
                sum
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_err: f64,
}

/// Monte-Carlo estimate of `‖k^{>D}‖_HS = (E[(Σ_{k>D} h_k <x,x'>^k)^2])^{1/2}`
/// for every truncation degree in `degrees`, all on the same sampled pairs.
pub fn truncation_hs_error(
    series: &InnerProductSeries,
    degrees: &[usize],
    cov: &CovarianceSpec,
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    if mc_samples < 2 {
        return Err(Error::InvalidArgument("need at least two Monte-Carlo samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root: Vec<f64> = cov.sigma().iter().map(|s| s.sqrt()).collect();
    let mut sums = vec![(0.0f64, 0.0f64); degrees.len()];
    for _ in 0..mc_samples {
        let mut t = 0.0;
        for r in &root {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            t += r * r * a * b;
        }
        for (acc, &deg) in sums.iter_mut().zip(degrees) {
            let sq = series.tail(deg, t).powi(2);
            acc.0 += sq;
            acc.1 += sq * sq;
        }
    }
    let n = mc_samples as f64;
    sums.into_iter()
        .map(|(s, s2)| {
            let mean = s / n;
            let var = ((s2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
            if !(mean.is_finite() && var.is_finite()) {
                return Err(Error::NonFinite("truncation tail"));
            }
            let value = mean.sqrt();
            let se_mean = (var / n).sqrt();
            // delta method for the square root
            let std_err = if value > 0.0 { se_mean / (2.0 * value) } else { 0.0 };
            Ok(McEstimate { value, std_err })
        })
        .collect()
}
