//! Power-law diagonal covariance `σ_j = C_α j^{-α}` with unit trace.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceSpec {
    d: usize,
    /// `None` for covariances built from an explicit diagonal.
    alpha: Option<f64>,
    sigma: Vec<f64>,
    c_alpha: f64,
}

impl CovarianceSpec {
    /// `σ_j = C_α j^{-α}` with `C_α = 1 / Σ_{j ≤ d} j^{-α}`.
    pub fn build(d: usize, alpha: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("d must be positive".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be a finite value >= 0, got {alpha}")));
        }
        let raw: Vec<f64> = (1..=d).map(|j| (j as f64).powf(-alpha)).collect();
        // smallest terms first
        let total: f64 = raw.iter().rev().sum();
        let c_alpha = 1.0 / total;
        let sigma = raw.iter().map(|r| c_alpha * r).collect();
        Ok(CovarianceSpec { d, alpha: Some(alpha), sigma, c_alpha })
    }

    /// Arbitrary positive diagonal, rescaled to unit trace. Must be non-increasing.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidArgument("empty diagonal".into()));
        }
        if diag.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("diagonal entries must be positive and finite".into()));
        }
        if diag.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("diagonal must be non-increasing".into()));
        }
        let total: f64 = diag.iter().rev().sum();
        let c = 1.0 / total;
        Ok(CovarianceSpec {
            d: diag.len(),
            alpha: None,
            sigma: diag.iter().map(|s| s * c).collect(),
            c_alpha: c,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn c_alpha(&self) -> f64 {
        self.c_alpha
    }

    pub fn ln_sigma(&self) -> Vec<f64> {
        self.sigma.iter().map(|s| s.ln()).collect()
    }

    pub fn trace(&self) -> f64 {
        self.sigma.iter().rev().sum()
    }

    /// `Tr Σ / σ_1`.
    pub fn r0(&self) -> f64 {
        self.trace() / self.sigma[0]
    }

    /// `(Tr Σ)^2 / Tr Σ^2`.
    #[allow(non_snake_case)]
    pub fn R0(&self) -> f64 {
        let t = self.trace();
        let sq: f64 = self.sigma.iter().rev().map(|s| s * s).sum();
        t * t / sq
    }
}

/// Asymptotic exponents of `r0` and `R0` in `d`.
pub fn predicted_r0_exponent(alpha: f64) -> f64 {
    if alpha < 1.0 {
        1.0 - alpha
    } else {
        0.0
    }
}

#[allow(non_snake_case)]
pub fn predicted_R0_exponent(alpha: f64) -> f64 {
    if alpha <= 0.5 {
        1.0
    } else if alpha < 1.0 {
        2.0 - 2.0 * alpha
    } else {
        0.0
    }
}

#[derive(Clone, Debug, Serialize)]
#[allow(non_snake_case)]
pub struct ScalingReport {
    pub alpha: f64,
    pub d_grid: Vec<usize>,
    pub r0: Vec<f64>,
    pub R0: Vec<f64>,
    pub r0_exponent: f64,
    pub R0_exponent: f64,
    pub predicted_r0_exponent: f64,
    pub predicted_R0_exponent: f64,
}

/// OLS slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::DegenerateFit("need at least two points".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(Error::DegenerateFit("all abscissae are equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

pub fn check_asymptotics(alpha: f64, d_grid: &[usize]) -> Result<ScalingReport> {
    if d_grid.len() < 2 {
        return Err(Error::DegenerateFit("need at least two grid points".into()));
    }
    if d_grid.windows(2).any(|w| w[1] <= w[0]) {
        // equal values make the fit degenerate, decreasing ones are just bad input
        if d_grid.windows(2).all(|w| w[1] == w[0]) {
            return Err(Error::DegenerateFit("all d values are equal".into()));
        }
        return Err(Error::InvalidArgument("d_grid must be strictly increasing".into()));
    }
    let specs = d_grid
        .iter()
        .map(|&d| CovarianceSpec::build(d, alpha))
        .collect::<Result<Vec<_>>>()?;
    let r0: Vec<f64> = specs.iter().map(|s| s.r0()).collect();
    let big: Vec<f64> = specs.iter().map(|s| s.R0()).collect();
    let ds: Vec<f64> = d_grid.iter().map(|&d| d as f64).collect();
    Ok(ScalingReport {
        alpha,
        d_grid: d_grid.to_vec(),
        r0_exponent: loglog_slope(&ds, &r0)?,
        R0_exponent: loglog_slope(&ds, &big)?,
        r0,
        R0: big,
        predicted_r0_exponent: predicted_r0_exponent(alpha),
        predicted_R0_exponent: predicted_R0_exponent(alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn build_examples() {
        let c = CovarianceSpec::build(4, 0.0).unwrap();
        assert_eq!(c.sigma(), &[0.25; 4]);
        let c = CovarianceSpec::build(3, 1.0).unwrap();
        for (s, e) in c.sigma().iter().zip([6.0 / 11.0, 3.0 / 11.0, 2.0 / 11.0]) {
            assert_relative_eq!(*s, e, max_relative = 1e-14);
        }
        let c = CovarianceSpec::build(2, 2.0).unwrap();
        assert_relative_eq!(c.sigma()[0], 0.8, max_relative = 1e-14);
        assert_relative_eq!(c.sigma()[1], 0.2, max_relative = 1e-14);
    }

    #[test]
    fn effective_dimension_examples() {
        let c = CovarianceSpec::build(10, 0.0).unwrap();
        assert_relative_eq!(c.r0(), 10.0, max_relative = 1e-12);
        assert_relative_eq!(c.R0(), 10.0, max_relative = 1e-12);
        let c = CovarianceSpec::build(3, 1.0).unwrap();
        assert_relative_eq!(c.r0(), 11.0 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(c.R0(), 121.0 / 49.0, max_relative = 1e-12);
    }

    #[test]
    fn grid_invariants() {
        for &alpha in &[0.0, 0.3, 0.5, 0.7, 0.9, 1.5] {
            for &d in &[10usize, 100, 1000] {
                let c = CovarianceSpec::build(d, alpha).unwrap();
                assert!((c.trace() - 1.0).abs() <= 1e-12);
                assert!(c.sigma().windows(2).all(|w| w[1] <= w[0]));
                let (r0, big) = (c.r0(), c.R0());
                assert!(big >= r0 * (1.0 - 1e-12), "R0 < r0 at alpha={alpha} d={d}");
                assert!((1.0..=d as f64 * (1.0 + 1e-12)).contains(&r0));
                assert!((1.0..=d as f64 * (1.0 + 1e-12)).contains(&big));
                for (j, s) in c.sigma().iter().enumerate() {
                    let exact = c.c_alpha() * ((j + 1) as f64).powf(-alpha);
                    assert_relative_eq!(*s, exact, max_relative = 1e-14);
                }
            }
        }
    }

    #[test]
    fn asymptotics_examples() {
        let r = check_asymptotics(0.0, &[100, 1000]).unwrap();
        assert!((r.r0_exponent - 1.0).abs() < 1e-12);
        let r = check_asymptotics(0.5, &[100, 10_000]).unwrap();
        let ratio = r.r0[1] / r.r0[0];
        assert!((ratio - 10.0).abs() <= 2.0, "ratio {ratio}");
        let r = check_asymptotics(1.5, &[100, 10_000]).unwrap();
        assert!(r.r0_exponent < 0.05);
        assert_eq!(r.predicted_R0_exponent, 0.0);
    }

    #[test]
    fn asymptotics_errors() {
        assert!(matches!(check_asymptotics(0.5, &[100, 100]), Err(Error::DegenerateFit(_))));
        assert!(matches!(check_asymptotics(0.5, &[100]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn predicted_exponents() {
        assert_eq!(predicted_R0_exponent(0.5), 1.0);
        assert!((predicted_R0_exponent(0.7) - 0.6).abs() < 1e-15);
        assert!((predicted_r0_exponent(0.3) - 0.7).abs() < 1e-15);
        assert_eq!(predicted_r0_exponent(1.5), 0.0);
    }

    #[test]
    fn diagonal_is_normalized() {
        let c = CovarianceSpec::from_diagonal(&[2.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(c.sigma()[0], 0.5);
        assert!(c.alpha().is_none());
        assert!(CovarianceSpec::from_diagonal(&[1.0, 2.0]).is_err());
    }
}
