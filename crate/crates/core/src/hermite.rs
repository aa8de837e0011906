//! Orthonormal probabilists' Hermite polynomials.
//!
//! `he_p = H_p / sqrt(p!)` where `H_p` is the monic probabilists' polynomial,
//! so that `E[he_p(u) he_q(u)] = δ_pq` for `u ~ N(0, 1)`.

use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::multiindex::{binomial, MultiIndex};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HermiteEvaluator {
    max_degree: usize,
}

impl HermiteEvaluator {
    pub fn new(max_degree: usize) -> Self {
        HermiteEvaluator { max_degree }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    fn check(&self, p: usize) -> Result<()> {
        if p > self.max_degree {
            return Err(Error::DegreeExceeded { degree: p, max: self.max_degree });
        }
        Ok(())
    }

    /// `he_p(u)`.
    pub fn he(&self, p: usize, u: f64) -> Result<f64> {
        self.check(p)?;
        let (mut prev, mut cur) = (0.0, 1.0);
        for k in 0..p {
            let next = (u * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
            prev = cur;
            cur = next;
        }
        Ok(cur)
    }

    /// `he_0(u), ..., he_{max_degree}(u)` into `out`.
    pub fn he_all(&self, u: f64, out: &mut [f64]) {
        normalized_all(u, out);
    }

    /// `He_β(z) = Π_j he_{β_j}(z_j)`, over the support of `β` only.
    pub fn he_tensor(&self, beta: &MultiIndex, z: &[f64]) -> Result<f64> {
        if z.len() != beta.dim() {
            return Err(Error::DimensionMismatch { expected: beta.dim(), got: z.len() });
        }
        beta.entries()
            .iter()
            .try_fold(1.0, |acc, &(j, e)| Ok(acc * self.he(e as usize, z[j - 1])?))
    }

    /// Coefficients of `he_p(u)^2 = Σ_s c_s he_{2s}(u)`, returned as `(2s, c_s)`.
    ///
    /// `c_s = C(p, s) sqrt(C(2s, s))`; the square `C(p,s)^2 C(2s,s)` is an
    /// exact integer and the root is taken last.
    pub fn square_expansion(&self, p: usize) -> Result<Vec<(usize, f64)>> {
        self.check(2 * p)?;
        (0..=p)
            .map(|s| {
                let a = binomial(p, s)?;
                let sq = a
                    .checked_mul(a)
                    .and_then(|v| v.checked_mul(binomial(2 * s, s).ok()?))
                    .ok_or(Error::Overflow { what: "square expansion coefficient" })?;
                Ok((2 * s, (sq as f64).sqrt()))
            })
            .collect()
    }
}

/// Normalized recurrence `he_{k+1} = (u he_k - sqrt(k) he_{k-1}) / sqrt(k+1)`.
pub fn normalized_all(u: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = u;
    }
    for k in 1..out.len().saturating_sub(1) {
        out[k + 1] = (u * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
    }
}

/// Monic probabilists' `H_0(u), ..., H_{n-1}(u)`: `H_{k+1} = u H_k - k H_{k-1}`.
pub fn monic_all(u: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = u;
    }
    for k in 1..out.len().saturating_sub(1) {
        out[k + 1] = u * out[k] - k as f64 * out[k - 1];
    }
}

/// Gauss–Hermite rule for the standard normal measure (weights sum to one),
/// by Golub–Welsch on the probabilists' Jacobi matrix.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one node".into()));
    }
    let jacobi = Mat::<f64>::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64).sqrt()
        } else {
            0.0
        }
    });
    let evd = jacobi
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|k| (s[k], u[(0, k)] * u[(0, k)])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // symmetrize: the rule is exact for odd integrands only if nodes mirror
    let nodes: Vec<f64> = (0..n).map(|k| 0.5 * (pairs[k].0 - pairs[n - 1 - k].0)).collect();
    let weights: Vec<f64> = (0..n).map(|k| 0.5 * (pairs[k].1 + pairs[n - 1 - k].1)).collect();
    let total: f64 = weights.iter().sum();
    Ok((nodes, weights.into_iter().map(|w| w / total).collect()))
}

/// Number of nodes used by the validation checks.
pub const QUADRATURE_NODES: usize = 64;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn he_examples() {
        let h = HermiteEvaluator::new(10);
        assert!(h.he(2, 1.0).unwrap().abs() < 1e-15);
        assert_eq!(h.he(0, 7.3).unwrap(), 1.0);
        assert!((h.he(3, 2.0).unwrap() - 2.0 / 6f64.sqrt()).abs() < 1e-14);
        assert!(matches!(h.he(11, 0.0), Err(Error::DegreeExceeded { degree: 11, max: 10 })));
    }

    #[test]
    fn he_matches_monic_over_root_factorial() {
        let mut a = [0.0; 12];
        let mut b = [0.0; 12];
        for &u in &[-3.1, -0.4, 0.0, 1.7, 2.9] {
            normalized_all(u, &mut a);
            monic_all(u, &mut b);
            let mut fact = 1.0;
            for k in 0..12 {
                if k > 0 {
                    fact *= k as f64;
                }
                assert!((a[k] - b[k] / fact.sqrt()).abs() <= 1e-10 * (1.0 + a[k].abs()));
            }
        }
    }

    #[test]
    fn tensor_examples() {
        let h = HermiteEvaluator::new(4);
        let z = [2.0, 9.0, 3.0];
        assert_eq!(h.he_tensor(&MultiIndex::zero(3), &z).unwrap(), 1.0);
        let b = MultiIndex::from_dense(&[1, 0, 1]).unwrap();
        assert!((h.he_tensor(&b, &z).unwrap() - 6.0).abs() < 1e-14);
        let b = MultiIndex::from_dense(&[2, 1]).unwrap();
        assert!(h.he_tensor(&b, &[1.0, 4.0]).unwrap().abs() < 1e-14);
        assert!(matches!(h.he_tensor(&b, &[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn square_expansion_examples() {
        let h = HermiteEvaluator::new(40);
        assert_eq!(h.square_expansion(0).unwrap(), vec![(0, 1.0)]);
        let c = h.square_expansion(1).unwrap();
        assert_eq!(c[0], (0, 1.0));
        assert_eq!(c[1].0, 2);
        assert!((c[1].1 - 2f64.sqrt()).abs() < 1e-15);
        for &u in &[-2.0, -1.0, 0.0, 1.0, 2.0] {
            let lhs = h.he(2, u).unwrap().powi(2);
            let rhs: f64 = h
                .square_expansion(2)
                .unwrap()
                .iter()
                .map(|&(k, c)| c * h.he(k, u).unwrap())
                .sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
        assert!(HermiteEvaluator::new(5).square_expansion(3).is_err());
    }

    #[test]
    fn orthonormal_under_quadrature() {
        let (x, w) = gauss_hermite(QUADRATURE_NODES).unwrap();
        let mut vals = vec![[0.0; 11]; x.len()];
        for (v, &u) in vals.iter_mut().zip(&x) {
            normalized_all(u, v);
        }
        for p in 0..=10 {
            for q in 0..=10 {
                let integral: f64 = vals.iter().zip(&w).map(|(v, w)| w * v[p] * v[q]).sum();
                let target = if p == q { 1.0 } else { 0.0 };
                assert!((integral - target).abs() <= 1e-8, "p={p} q={q} got {integral}");
            }
        }
    }

    #[test]
    fn quadrature_moments() {
        // E[u^4] = 3, E[u^6] = 15
        let (x, w) = gauss_hermite(QUADRATURE_NODES).unwrap();
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        let m6: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        assert!((m4 - 3.0).abs() < 1e-10);
        assert!((m6 - 15.0).abs() < 1e-9);
    }
}
