//! Data sampling, the Hermite kernel, kernel ridge regression and Monte-Carlo
//! excess risk.
//!
//! Everything here works in whitened coordinates `z = Σ^{-1/2} x`; `X` is kept
//! alongside for the linear-kernel comparisons.

use std::sync::Arc;

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::{Llt, Solve};
use faer::{Accum, Mat, Par, Side};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::hermite::{monic_all, normalized_all};
use crate::multiindex::{self, factorial, MultiIndex};
use crate::spectral::KernelSpec;

#[derive(Clone, Debug)]
pub struct Dataset {
    /// `n × d`, rows `x_i ~ N(0, Σ)`.
    pub x: Mat<f64>,
    /// `n × d`, `z_ij = x_ij / sqrt(σ_j)`.
    pub z: Mat<f64>,
    pub y: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Draws `n` standard normal rows into an `n × d` matrix, row by row.
fn standard_normal_rows(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    let mut z = Mat::<f64>::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            z[(i, j)] = StandardNormal.sample(rng);
        }
    }
    z
}

impl Dataset {
    /// Covariates only; `y` is empty until [`Dataset::label`].
    pub fn sample(n: usize, cov: &CovarianceSpec, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = standard_normal_rows(n, cov.d(), &mut rng);
        let root: Vec<f64> = cov.sigma().iter().map(|s| s.sqrt()).collect();
        let x = Mat::<f64>::from_fn(n, cov.d(), |i, j| z[(i, j)] * root[j]);
        Ok(Dataset { x, z, y: Vec::new(), noise_sigma: 0.0, seed })
    }

    /// `y_i = f*(z_i) + noise_sigma · ε_i`; noise comes from a separate stream of the same seed.
    pub fn label(mut self, target: &TargetFunction, noise_sigma: f64) -> Result<Self> {
        if !(noise_sigma >= 0.0) {
            return Err(Error::InvalidArgument(format!("noise_sigma must be >= 0, got {noise_sigma}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(1);
        let n = self.z.nrows();
        let mut y = Vec::with_capacity(n);
        let mut row = vec![0.0; self.z.ncols()];
        for i in 0..n {
            for (j, r) in row.iter_mut().enumerate() {
                *r = self.z[(i, j)];
            }
            let eps: f64 = if noise_sigma > 0.0 { StandardNormal.sample(&mut rng) } else { 0.0 };
            y.push(target.eval(&row)? + noise_sigma * eps);
        }
        self.y = y;
        self.noise_sigma = noise_sigma;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }
}

/// `f*(z) = Σ c · he_p(z_j)` over `(j, p, c)` terms, `j` 1-based.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TargetFunction {
    pub dim: usize,
    pub terms: Vec<(usize, u32, f64)>,
}

impl TargetFunction {
    pub fn new(dim: usize, terms: Vec<(usize, u32, f64)>) -> Result<Self> {
        for (i, &(j, p, c)) in terms.iter().enumerate() {
            if j == 0 || j > dim {
                return Err(Error::InvalidArgument(format!("target coordinate {j} outside [1, {dim}]")));
            }
            if !c.is_finite() {
                return Err(Error::InvalidArgument(format!("target coefficient {c} is not finite")));
            }
            if terms[..i].iter().any(|&(j2, p2, _)| j2 == j && p2 == p) {
                return Err(Error::InvalidArgument(format!("target term ({j}, {p}) repeated")));
            }
        }
        Ok(TargetFunction { dim, terms })
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.iter().map(|t| t.1).max().unwrap_or(0)
    }

    pub fn eval(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: z.len() });
        }
        let mut he = vec![0.0; self.max_degree() as usize + 1];
        Ok(self
            .terms
            .iter()
            .map(|&(j, p, c)| {
                normalized_all(z[j - 1], &mut he);
                c * he[p as usize]
            })
            .sum())
    }

    /// Coefficients in the `He_β` basis; distinct terms map to distinct `β = p e_j`.
    pub fn hermite_coefficients(&self) -> Vec<(MultiIndex, f64)> {
        self.terms
            .iter()
            .map(|&(j, p, c)| (MultiIndex::unit(self.dim, j, p).expect("validated at construction"), c))
            .collect()
    }

    /// `‖f*‖²_{L²}`.
    pub fn norm_sq(&self) -> f64 {
        self.terms.iter().map(|t| t.2 * t.2).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum TargetKind {
    FirstCoord,
    LastCoord,
    /// Explicit `(j, p, c)` terms.
    Custom(Vec<(usize, u32, f64)>),
}

impl TargetKind {
    /// `first`, `last`, or `custom:j:p:c,j:p:c,...` (`custom:` alone is the zero target).
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "first" => Ok(TargetKind::FirstCoord),
            "last" => Ok(TargetKind::LastCoord),
            other => {
                let body = other
                    .strip_prefix("custom:")
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown target {other:?}")))?;
                let mut terms = Vec::new();
                for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let parts: Vec<&str> = item.split(':').collect();
                    let bad = || Error::InvalidArgument(format!("malformed target term {item:?}, expected j:p:c"));
                    if parts.len() != 3 {
                        return Err(bad());
                    }
                    terms.push((
                        parts[0].parse().map_err(|_| bad())?,
                        parts[1].parse().map_err(|_| bad())?,
                        parts[2].parse().map_err(|_| bad())?,
                    ));
                }
                Ok(TargetKind::Custom(terms))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            TargetKind::FirstCoord => "first".into(),
            TargetKind::LastCoord => "last".into(),
            TargetKind::Custom(t) => format!(
                "custom:{}",
                t.iter().map(|(j, p, c)| format!("{j}:{p}:{c}")).collect::<Vec<_>>().join(",")
            ),
        }
    }
}

/// Default target `he_1 + he_2 + he_3` on coordinate 1 or `d`.
pub fn make_target(kind: &TargetKind, cov: &CovarianceSpec) -> Result<TargetFunction> {
    let d = cov.d();
    let on = |j: usize| (1..=3).map(|p| (j, p, 1.0)).collect();
    match kind {
        TargetKind::FirstCoord => TargetFunction::new(d, on(1)),
        TargetKind::LastCoord => TargetFunction::new(d, on(d)),
        TargetKind::Custom(t) => TargetFunction::new(d, t.clone()),
    }
}

/// `k(z, z') = Σ_k ξ_k Σ_{|β|=k} multinomial(β) σ^β He_β(z) He_β(z')`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermiteKernel {
    xi: Vec<f64>,
    sigma: Vec<f64>,
    // per level: partitions of k with their log-series coefficients
    partitions: Vec<Vec<(Vec<usize>, f64)>>,
}

/// Partitions of `k` (parts non-increasing).
fn partitions(k: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            out.push(cur.clone());
            return;
        }
        for p in (1..=rest.min(max)).rev() {
            cur.push(p);
            rec(rest - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, k, &mut Vec::new(), &mut out);
    out
}

/// `[t^k] log(1 + Σ_m c_m t^m) = Σ_{μ ⊢ k} (-1)^{r+1} (r-1)! / Π n_m! · Π c_{μ_i}`.
fn log_coefficient(mu: &[usize]) -> f64 {
    let r = mu.len();
    let mut denom = 1.0;
    let mut i = 0;
    while i < r {
        let mut run = 1;
        while i + run < r && mu[i + run] == mu[i] {
            run += 1;
        }
        denom *= factorial(run).expect("small") as f64;
        i += run;
    }
    let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
    sign * factorial(r - 1).expect("small") as f64 / denom
}

/// Rows per block when assembling kernel matrices.
const ROW_BLOCK: usize = 256;

impl HermiteKernel {
    pub fn new(spec: &KernelSpec, cov: &CovarianceSpec) -> Result<Self> {
        if !spec.is_hermite() {
            return Err(Error::InvalidArgument("HermiteKernel needs a Hermite kernel spec".into()));
        }
        let levels = spec.degree();
        if levels > 20 {
            return Err(Error::DegreeExceeded { degree: levels, max: 20 });
        }
        let partitions = (0..=levels)
            .map(|k| {
                if k == 0 {
                    Vec::new()
                } else {
                    partitions(k).into_iter().map(|mu| {
                        let c = log_coefficient(&mu);
                        (mu, c)
                    }).collect()
                }
            })
            .collect();
        Ok(HermiteKernel { xi: spec.coeffs().to_vec(), sigma: cov.sigma().to_vec(), partitions })
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn levels(&self) -> usize {
        self.xi.len() - 1
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        Ok(())
    }

    fn combine(&self, g: &[f64]) -> f64 {
        let mut fact = 1.0;
        let mut out = 0.0;
        for (k, (&xi, &gk)) in self.xi.iter().zip(g).enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            out += xi * fact * gk;
        }
        out
    }

    /// Generating-polynomial evaluation: level `k` is `k! [t^k] Π_j P_j(t)` with
    /// `P_j(t) = Σ_m (σ_j t)^m H_m(z_j) H_m(z'_j) / (m!)^2`, monic `H_m`.
    pub fn eval_pair(&self, z: &[f64], zp: &[f64]) -> Result<f64> {
        self.check(z)?;
        self.check(zp)?;
        let l = self.levels();
        let mut ha = vec![0.0; l + 1];
        let mut hb = vec![0.0; l + 1];
        let mut poly = vec![0.0; l + 1];
        poly[0] = 1.0;
        let mut factor = vec![0.0; l + 1];
        let mut next = vec![0.0; l + 1];
        for j in 0..self.dim() {
            monic_all(z[j], &mut ha);
            monic_all(zp[j], &mut hb);
            let mut sp = 1.0;
            let mut fact = 1.0;
            for m in 0..=l {
                if m > 0 {
                    sp *= self.sigma[j];
                    fact *= m as f64;
                }
                factor[m] = sp * ha[m] * hb[m] / (fact * fact);
            }
            next.iter_mut().for_each(|v| *v = 0.0);
            for a in 0..=l {
                if poly[a] == 0.0 {
                    continue;
                }
                for b in 0..=l - a {
                    next[a + b] += poly[a] * factor[b];
                }
            }
            std::mem::swap(&mut poly, &mut next);
        }
        Ok(self.combine(&poly))
    }

    /// Direct summation over every `β` with `|β| ≤ L`.
    pub fn eval_direct(&self, z: &[f64], zp: &[f64]) -> Result<f64> {
        self.check(z)?;
        self.check(zp)?;
        let l = self.levels();
        let mut ha = vec![vec![0.0; l + 1]; self.dim()];
        let mut hb = vec![vec![0.0; l + 1]; self.dim()];
        for j in 0..self.dim() {
            normalized_all(z[j], &mut ha[j]);
            normalized_all(zp[j], &mut hb[j]);
        }
        let mut total = 0.0;
        for beta in multiindex::enumerate(self.dim(), l)? {
            let xi = self.xi[beta.degree()];
            if xi == 0.0 {
                continue;
            }
            let prod: f64 = beta
                .entries()
                .iter()
                .map(|&(j, e)| ha[j - 1][e as usize] * hb[j - 1][e as usize])
                .product();
            total += xi * beta.multinomial()? as f64 * beta.power(&self.sigma) * prod;
        }
        Ok(total)
    }

    /// Per-partition features `A_μ[j] = Π_{m ∈ μ} σ_j^{m/2} H_m(z_j) / m!`,
    /// laid out as one `rows × (P_k d)` matrix per level `k`, scaled by the
    /// log-series coefficient when `weighted`.
    fn power_features(&self, z: &Mat<f64>, weighted: bool) -> Vec<Mat<f64>> {
        let (n, d, l) = (z.nrows(), self.dim(), self.levels());
        // a[m][(i, j)] = σ_j^{m/2} H_m(z_ij) / m!
        let mut a = vec![Mat::<f64>::zeros(n, d); l + 1];
        let mut h = vec![0.0; l + 1];
        for i in 0..n {
            for j in 0..d {
                monic_all(z[(i, j)], &mut h);
                let mut scale = 1.0;
                let root = self.sigma[j].sqrt();
                for m in 0..=l {
                    if m > 0 {
                        scale *= root / m as f64;
                    }
                    a[m][(i, j)] = scale * h[m];
                }
            }
        }
        (1..=l)
            .map(|k| {
                let parts = &self.partitions[k];
                let mut f = Mat::<f64>::zeros(n, parts.len() * d);
                for (p, (mu, coef)) in parts.iter().enumerate() {
                    let w = if weighted { *coef } else { 1.0 };
                    for i in 0..n {
                        for j in 0..d {
                            let v: f64 = mu.iter().map(|&m| a[m][(i, j)]).product();
                            f[(i, p * d + j)] = w * v;
                        }
                    }
                }
                f
            })
            .collect()
    }

    /// `K[i, j] = k(left_i, right_j)` via power sums of the per-coordinate
    /// generating polynomials, assembled in row blocks.
    pub fn cross_matrix(&self, left: &Mat<f64>, right: &Mat<f64>) -> Result<Mat<f64>> {
        if left.ncols() != self.dim() || right.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: left.ncols().max(right.ncols()) });
        }
        let (nl, nr, l) = (left.nrows(), right.nrows(), self.levels());
        let right_f = self.power_features(right, false);
        let starts: Vec<usize> = (0..nl).step_by(ROW_BLOCK).collect();
        let blocks: Vec<Mat<f64>> = starts
            .par_iter()
            .map(|&start| {
                let rows = ROW_BLOCK.min(nl - start);
                let sub = left.subrows(start, rows).to_owned();
                let left_f = self.power_features(&sub, true);
                // s[k-1] = S_k restricted to this block
                let s: Vec<Mat<f64>> = (0..l)
                    .map(|k| {
                        let mut out = Mat::<f64>::zeros(rows, nr);
                        matmul(out.as_mut(), Accum::Replace, left_f[k].as_ref(), right_f[k].transpose(), 1.0, Par::Seq);
                        out
                    })
                    .collect();
                let mut block = Mat::<f64>::zeros(rows, nr);
                let mut g = vec![0.0; l + 1];
                for i in 0..rows {
                    for j in 0..nr {
                        g[0] = 1.0;
                        for k in 1..=l {
                            let mut acc = 0.0;
                            for t in 1..=k {
                                acc += t as f64 * s[t - 1][(i, j)] * g[k - t];
                            }
                            g[k] = acc / k as f64;
                        }
                        block[(i, j)] = self.combine(&g);
                    }
                }
                block
            })
            .collect();
        let mut out = Mat::<f64>::zeros(nl, nr);
        for (start, block) in starts.iter().zip(blocks) {
            out.subrows_mut(*start, block.nrows()).copy_from(&block);
        }
        Ok(out)
    }

    /// Symmetric kernel matrix of the rows of `z`.
    pub fn matrix(&self, z: &Mat<f64>) -> Result<Mat<f64>> {
        let k = self.cross_matrix(z, z)?;
        let n = k.nrows();
        Ok(Mat::<f64>::from_fn(n, n, |i, j| 0.5 * (k[(i, j)] + k[(j, i)])))
    }
}

/// Factorization of `K + λI` shared by every right-hand side on the same inputs.
pub struct KrrSolver {
    kernel: HermiteKernel,
    z_train: Arc<Mat<f64>>,
    lambda: f64,
    k: Mat<f64>,
    llt: Llt<f64>,
}

impl KrrSolver {
    pub fn new(kernel: HermiteKernel, z_train: Mat<f64>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
        }
        let k = kernel.matrix(&z_train)?;
        let n = k.nrows();
        let reg = Mat::<f64>::from_fn(n, n, |i, j| k[(i, j)] + if i == j { lambda } else { 0.0 });
        let llt = reg
            .llt(Side::Lower)
            .map_err(|e| Error::Factorization(format!("K + lambda I is not positive definite: {e:?}")))?;
        Ok(KrrSolver { kernel, z_train: Arc::new(z_train), lambda, k, llt })
    }

    pub fn kernel_matrix(&self) -> &Mat<f64> {
        &self.k
    }

    fn apply(&self, a: &Mat<f64>) -> Mat<f64> {
        let mut out = &self.k * a;
        for i in 0..out.nrows() {
            out[(i, 0)] += self.lambda * a[(i, 0)];
        }
        out
    }

    /// Dual coefficients `(K + λI)^{-1} y`, with one step of iterative refinement.
    pub fn fit(&self, y: &[f64]) -> Result<FittedKrr> {
        let n = self.k.nrows();
        if y.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: y.len() });
        }
        let rhs = Mat::<f64>::from_fn(n, 1, |i, _| y[i]);
        let mut a = self.llt.solve(&rhs);
        let r = &rhs - self.apply(&a);
        a += self.llt.solve(&r);
        let res = &rhs - self.apply(&a);
        let norm = |m: &Mat<f64>| (0..n).map(|i| m[(i, 0)] * m[(i, 0)]).sum::<f64>().sqrt();
        let ynorm = norm(&rhs);
        let residual = if ynorm > 0.0 { norm(&res) / ynorm } else { norm(&res) };
        Ok(FittedKrr {
            coeffs: (0..n).map(|i| a[(i, 0)]).collect(),
            z_train: Arc::clone(&self.z_train),
            kernel: self.kernel.clone(),
            lambda: self.lambda,
            relative_residual: residual,
        })
    }
}

#[derive(Clone, Debug)]
pub struct FittedKrr {
    pub coeffs: Vec<f64>,
    pub z_train: Arc<Mat<f64>>,
    pub kernel: HermiteKernel,
    pub lambda: f64,
    /// `‖(K+λI)a - y‖ / ‖y‖`.
    pub relative_residual: f64,
}

/// One-shot fit on a labelled dataset.
pub fn fit(data: &Dataset, kernel: &HermiteKernel, lambda: f64) -> Result<FittedKrr> {
    KrrSolver::new(kernel.clone(), data.z.clone(), lambda)?.fit(&data.y)
}

impl FittedKrr {
    /// `f̂(z) = k_zᵀ a` at a whitened point.
    pub fn predict_z(&self, z: &[f64]) -> Result<f64> {
        let mut out = 0.0;
        let mut row = vec![0.0; self.z_train.ncols()];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, r) in row.iter_mut().enumerate() {
                *r = self.z_train[(i, j)];
            }
            out += a * self.kernel.eval_pair(z, &row)?;
        }
        Ok(out)
    }

    /// Prediction at a raw covariate `x`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let z: Vec<f64> = x.iter().zip(&self.kernel.sigma).map(|(x, s)| x / s.sqrt()).collect();
        self.predict_z(&z)
    }

    /// Predictions at the rows of a whitened matrix.
    pub fn predict_many(&self, z: &Mat<f64>) -> Result<Vec<f64>> {
        let cross = self.kernel.cross_matrix(z, &self.z_train)?;
        Ok(self.predict_from_cross(&cross))
    }

    fn predict_from_cross(&self, cross: &Mat<f64>) -> Vec<f64> {
        (0..cross.nrows())
            .map(|i| self.coeffs.iter().enumerate().map(|(j, a)| cross[(i, j)] * a).sum())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_err: f64,
}

fn mean_and_se(v: &[f64]) -> RiskEstimate {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    RiskEstimate { mean, std_err: (var / n).sqrt() }
}

/// Mean of `(f̂(x) - f*(x))²` over `n_test` fresh covariates.
pub fn excess_risk_mc(
    model: &FittedKrr,
    target: &TargetFunction,
    cov: &CovarianceSpec,
    n_test: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    Ok(excess_risk_mc_shared(&[(model, target)], cov, n_test, seed)?[0])
}

/// Several models trained on the same inputs, scored on one test sample and
/// one cross-kernel matrix.
pub fn excess_risk_mc_shared(
    pairs: &[(&FittedKrr, &TargetFunction)],
    cov: &CovarianceSpec,
    n_test: usize,
    seed: u64,
) -> Result<Vec<RiskEstimate>> {
    if n_test < 100 {
        return Err(Error::InvalidArgument(format!("n_test must be >= 100, got {n_test}")));
    }
    let Some((first, _)) = pairs.first() else {
        return Ok(Vec::new());
    };
    if pairs.iter().any(|(m, _)| !Arc::ptr_eq(&m.z_train, &first.z_train) && *m.z_train != *first.z_train) {
        return Err(Error::InvalidArgument("shared risk estimate needs models on the same inputs".into()));
    }
    let test = Dataset::sample(n_test, cov, seed)?;
    let cross = first.kernel.cross_matrix(&test.z, &first.z_train)?;
    let mut row = vec![0.0; cov.d()];
    pairs
        .iter()
        .map(|(model, target)| {
            let pred = model.predict_from_cross(&cross);
            let mut sq = Vec::with_capacity(n_test);
            for (i, p) in pred.iter().enumerate() {
                for (j, r) in row.iter_mut().enumerate() {
                    *r = test.z[(i, j)];
                }
                sq.push((p - target.eval(&row)?).powi(2));
            }
            Ok(mean_and_se(&sq))
        })
        .collect()
}
