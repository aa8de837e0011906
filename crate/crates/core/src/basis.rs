//! Monomial-to-Hermite change of basis, the Gaussian moment matrix, and the
//! dense eigenvalue oracle for inner-product kernels at small `(d, D)`.
//!
//! Rows and columns are indexed by the canonical multi-index order. With the
//! feature vectors
//!
//! ```text
//! Φ_β = sqrt(h_|β| multinomial(β)) x^β,   Ψ_k = sqrt(C_k) He_k(z),
//! C_k = h_|k| multinomial(k) σ^k,
//! ```
//!
//! the change of basis reads `Φ = Λ Ψ` and the moment matrix factors as
//! `M = E[Φ Φᵀ] = Λ diag(C) Λᵀ`.

use faer::{Mat, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::hermite::normalized_all;
use crate::multiindex::{self, factorial, MultiIndex};

/// Largest matrix dimension the dense oracle will build.
pub const DENSE_CAP: u128 = 5000;

/// Integer part of the univariate coefficient of `he_k` in `u^p`:
/// `p! / (2^s s! k!)` with `s = (p - k)/2`. The full coefficient is this
/// times `sqrt(k!)`.
fn univariate_coeff_int(p: u32, k: u32) -> Result<u128> {
    let s = (p - k) / 2;
    let num = factorial(p as usize)?;
    let den = (1u128 << s)
        .checked_mul(factorial(s as usize)?)
        .and_then(|v| v.checked_mul(factorial(k as usize).ok()?))
        .ok_or(Error::Overflow { what: "hermite expansion" })?;
    Ok(num / den)
}

/// `z^β = Σ_k c_k He_k(z)` over `k ≤ β`, `k ≡ β (mod 2)`, returned in canonical order of `k`.
pub fn hermite_expand_monomial(beta: &MultiIndex) -> Result<Vec<(MultiIndex, f64)>> {
    if beta.degree() > 20 {
        return Err(Error::DegreeExceeded { degree: beta.degree(), max: 20 });
    }
    // per-coordinate candidate (coordinate, k, coefficient)
    let mut terms: Vec<(Vec<(usize, u32)>, f64)> = vec![(Vec::new(), 1.0)];
    for &(j, p) in beta.entries() {
        let mut next = Vec::new();
        for (pairs, c) in &terms {
            let mut k = p as i64;
            while k >= 0 {
                let ku = k as u32;
                let coeff = univariate_coeff_int(p, ku)? as f64 * (factorial(ku as usize)? as f64).sqrt();
                let mut pp = pairs.clone();
                pp.push((j, ku));
                next.push((pp, c * coeff));
                k -= 2;
            }
        }
        terms = next;
    }
    let mut out = terms
        .into_iter()
        .map(|(pairs, c)| Ok((MultiIndex::from_pairs(beta.dim(), pairs)?, c)))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

fn level_coeff(h: &[f64], k: usize) -> f64 {
    h.get(k).copied().unwrap_or(0.0)
}

/// `h_|β| multinomial(β) σ^β`.
pub fn feature_variance(beta: &MultiIndex, h: &[f64], cov: &CovarianceSpec) -> Result<f64> {
    Ok(level_coeff(h, beta.degree()) * beta.multinomial()? as f64 * beta.power(cov.sigma()))
}

fn checked_enumerate(d: usize, degree: usize) -> Result<Vec<MultiIndex>> {
    multiindex::enumerate_with_cap(d, degree, DENSE_CAP)
}

fn check_cov(d: usize, cov: &CovarianceSpec) -> Result<()> {
    if cov.d() != d {
        return Err(Error::DimensionMismatch { expected: d, got: cov.d() });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct BasisMatrix {
    pub betas: Vec<MultiIndex>,
    /// Row `β`, column `k`.
    pub lambda: Mat<f64>,
    pub op_norm: f64,
    pub inv_op_norm: f64,
}

impl BasisMatrix {
    pub fn dim(&self) -> usize {
        self.betas.len()
    }

    /// Every entry above the diagonal is exactly zero.
    pub fn is_lower_triangular(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (i + 1..n).all(|j| self.lambda[(i, j)] == 0.0))
    }

    pub fn is_upper_triangular(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| self.lambda[(i, j)] == 0.0))
    }
}

/// `Λ_{β,k} = sqrt(C_β / C_k) · coeff(z^β, He_k)`.
pub fn build_lambda(d: usize, degree: usize, h: &[f64], cov: &CovarianceSpec) -> Result<BasisMatrix> {
    check_cov(d, cov)?;
    for k in 0..=degree {
        if !(level_coeff(h, k) > 0.0) {
            return Err(Error::ZeroLevelCoefficient { level: k });
        }
    }
    let betas = checked_enumerate(d, degree)?;
    let index: std::collections::HashMap<&MultiIndex, usize> = betas.iter().enumerate().map(|(i, b)| (b, i)).collect();
    let c = betas.iter().map(|b| feature_variance(b, h, cov)).collect::<Result<Vec<_>>>()?;
    let n = betas.len();
    let mut lambda = Mat::<f64>::zeros(n, n);
    for (row, beta) in betas.iter().enumerate() {
        for (k, coeff) in hermite_expand_monomial(beta)? {
            let col = index[&k];
            lambda[(row, col)] = (c[row] / c[col]).sqrt() * coeff;
        }
    }
    let sv = lambda
        .singular_values()
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let op_norm = sv[0];
    let inv_op_norm = 1.0 / sv[sv.len() - 1];
    Ok(BasisMatrix { betas, lambda, op_norm, inv_op_norm })
}

/// `E[x^{2k}] = (2k-1)!! σ^k`, odd moments zero.
pub fn gaussian_moment(power: u32, sigma: f64) -> f64 {
    if power % 2 == 1 {
        return 0.0;
    }
    let mut m = 1.0;
    for k in 1..=power / 2 {
        m *= (2 * k - 1) as f64 * sigma;
    }
    m
}

#[derive(Clone, Debug)]
pub struct MomentMatrix {
    pub betas: Vec<MultiIndex>,
    pub m: Mat<f64>,
}

/// `M_{β,γ} = sqrt(h_|β| multinomial(β)) sqrt(h_|γ| multinomial(γ)) E[x^{β+γ}]`.
pub fn moment_matrix(d: usize, degree: usize, h: &[f64], cov: &CovarianceSpec) -> Result<MomentMatrix> {
    check_cov(d, cov)?;
    let betas = checked_enumerate(d, degree)?;
    let w = betas
        .iter()
        .map(|b| Ok((level_coeff(h, b.degree()) * b.multinomial()? as f64).sqrt()))
        .collect::<Result<Vec<_>>>()?;
    let sigma = cov.sigma();
    let n = betas.len();
    let m = Mat::<f64>::from_fn(n, n, |i, j| {
        let (a, b) = (betas[i].to_dense(), betas[j].to_dense());
        let moment: f64 = (0..d).map(|t| gaussian_moment(a[t] + b[t], sigma[t])).product();
        w[i] * w[j] * moment
    });
    Ok(MomentMatrix { betas, m })
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorizationReport {
    pub d: usize,
    pub degree: usize,
    pub alpha: Option<f64>,
    pub size: usize,
    /// `max |Φ - Λ Ψ|` over the Monte-Carlo samples.
    pub phi_deviation: f64,
    /// Same with `Λᵀ` in place of `Λ`.
    pub phi_deviation_transposed: f64,
    /// `max |M - Λ diag(C) Λᵀ|`.
    pub reconstruction_deviation: f64,
    /// `max_i |eig_i(M) - r_i| / r_i` against the sorted values `h_|β| |β|! σ^β`.
    pub closed_form_max_rel_deviation: f64,
    pub eigenvalues: Vec<f64>,
    pub closed_form: Vec<f64>,
    pub op_norm: f64,
    pub inv_op_norm: f64,
    pub c1: f64,
    pub c2: f64,
    /// `C1 C_(i) ≤ eig_i(M) ≤ C2 C_(i)` with `C_(i)` the sorted `h_|β| multinomial(β) σ^β`.
    pub feature_bound_holds: bool,
    /// `C1 s_(i) ≤ eig_i(M) ≤ C2 s_(i)` with `s_(i)` the sorted bare `σ^β`.
    pub bare_bound_holds: bool,
    pub bare_bound_worst_lower: f64,
    pub bare_bound_worst_upper: f64,
    pub lambda_lower_triangular: bool,
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Relative slack granted to the two-sided bounds for floating round-off.
const BOUND_SLACK: f64 = 1e-9;

pub fn verify_factorization(
    d: usize,
    degree: usize,
    h: &[f64],
    cov: &CovarianceSpec,
    mc_samples: usize,
    seed: u64,
) -> Result<FactorizationReport> {
    let basis = build_lambda(d, degree, h, cov)?;
    let moments = moment_matrix(d, degree, h, cov)?;
    let betas = &basis.betas;
    let n = betas.len();
    let c = betas.iter().map(|b| feature_variance(b, h, cov)).collect::<Result<Vec<_>>>()?;
    let lam = &basis.lambda;

    // (a) Φ = ΛΨ on sampled points
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root: Vec<f64> = cov.sigma().iter().map(|s| s.sqrt()).collect();
    let mut he = vec![vec![0.0; degree + 1]; d];
    let (mut dev, mut dev_t) = (0.0f64, 0.0f64);
    for _ in 0..mc_samples {
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        for (t, row) in he.iter_mut().enumerate() {
            normalized_all(z[t], row);
        }
        let psi: Vec<f64> = betas
            .iter()
            .zip(&c)
            .map(|(b, ck)| ck.sqrt() * b.entries().iter().map(|&(j, e)| he[j - 1][e as usize]).product::<f64>())
            .collect();
        for (i, b) in betas.iter().enumerate() {
            let x_pow: f64 = b.entries().iter().map(|&(j, e)| (root[j - 1] * z[j - 1]).powi(e as i32)).product();
            let phi = (level_coeff(h, b.degree()) * b.multinomial()? as f64).sqrt() * x_pow;
            let (mut a, mut at) = (0.0, 0.0);
            for k in 0..n {
                a += lam[(i, k)] * psi[k];
                at += lam[(k, i)] * psi[k];
            }
            dev = dev.max((phi - a).abs());
            dev_t = dev_t.max((phi - at).abs());
        }
    }

    // (b) M = Λ diag(C) Λᵀ
    let scaled = Mat::<f64>::from_fn(n, n, |i, k| lam[(i, k)] * c[k]);
    let recon = &scaled * lam.transpose();
    let mut recon_dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            recon_dev = recon_dev.max((recon[(i, j)] - moments.m[(i, j)]).abs());
        }
    }

    // (c) spectrum of M against closed forms and the two-sided bounds
    let eig = sorted_desc(
        moments
            .m
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?,
    );
    let closed = sorted_desc(
        betas
            .iter()
            .map(|b| Ok(level_coeff(h, b.degree()) * factorial(b.degree())? as f64 * b.power(cov.sigma())))
            .collect::<Result<Vec<_>>>()?,
    );
    let rel = eig
        .iter()
        .zip(&closed)
        .map(|(e, r)| (e - r).abs() / r.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);

    let c1 = basis.inv_op_norm.powi(-2);
    let c2 = basis.op_norm.powi(2);
    let within = |reference: &[f64]| {
        let mut worst_lo = f64::INFINITY;
        let mut worst_hi = f64::INFINITY;
        for (e, r) in eig.iter().zip(reference) {
            // margins as fractions of the bound; negative means violated
            worst_lo = worst_lo.min((e - c1 * r) / (c1 * r));
            worst_hi = worst_hi.min((c2 * r - e) / (c2 * r));
        }
        (worst_lo, worst_hi)
    };
    let feature_sorted = sorted_desc(c.clone());
    let bare_sorted = sorted_desc(betas.iter().map(|b| b.power(cov.sigma())).collect());
    let (flo, fhi) = within(&feature_sorted);
    let (blo, bhi) = within(&bare_sorted);

    Ok(FactorizationReport {
        d,
        degree,
        alpha: cov.alpha(),
        size: n,
        phi_deviation: dev,
        phi_deviation_transposed: dev_t,
        reconstruction_deviation: recon_dev,
        closed_form_max_rel_deviation: rel,
        eigenvalues: eig,
        closed_form: closed,
        op_norm: basis.op_norm,
        inv_op_norm: basis.inv_op_norm,
        c1,
        c2,
        feature_bound_holds: flo >= -BOUND_SLACK && fhi >= -BOUND_SLACK,
        bare_bound_holds: blo >= -BOUND_SLACK && bhi >= -BOUND_SLACK,
        bare_bound_worst_lower: blo,
        bare_bound_worst_upper: bhi,
        lambda_lower_triangular: basis.is_lower_triangular(),
    })
}
