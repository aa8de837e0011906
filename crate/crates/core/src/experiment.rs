//! Risk-curve experiments: seeded KRR runs over an `(α, n)` grid with the
//! matching theory prediction.
//!
//! Seeds. Training inputs for replicate `s` at sample size `n` are drawn from
//! `derive_seed(master, [TRAIN, s, n])` and the test sample of replicate `s`
//! from `derive_seed(master, [TEST, s])`. Neither depends on `α`, so every
//! covariance sees the same whitened draws, and nothing depends on the number
//! of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::krr::{excess_risk_mc_shared, make_target, Dataset, HermiteKernel, KrrSolver, TargetKind};
use crate::spectral::KernelSpec;
use crate::theory::{effective_risk, partition, HighResidual, Regime, TheoryMode};

const TRAIN: u64 = 1;
const TEST: u64 = 2;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `path` into `master` one word at a time.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiskGrid {
    pub d: usize,
    pub alphas: Vec<f64>,
    pub ns: Vec<usize>,
    pub lambda: f64,
    pub xi: Vec<f64>,
    pub seeds: usize,
    pub master_seed: u64,
    pub targets: Vec<TargetKind>,
    pub noise_sigma: f64,
    pub n_test: usize,
    pub theory_mode: TheoryMode,
    pub delta0: f64,
}

impl RiskGrid {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d < 2 {
            return bad(format!("d must be >= 2, got {}", self.d));
        }
        if self.alphas.is_empty() || self.ns.is_empty() || self.targets.is_empty() {
            return bad("alpha, n and target lists must be non-empty".into());
        }
        if self.ns.contains(&0) {
            return bad("every n must be positive".into());
        }
        if self.seeds == 0 {
            return bad("seeds must be positive".into());
        }
        if !(self.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.n_test < 100 {
            return bad(format!("n_test must be >= 100, got {}", self.n_test));
        }
        KernelSpec::hermite(self.xi.clone())?;
        for &a in &self.alphas {
            CovarianceSpec::build(self.d, a)?;
        }
        Ok(())
    }

    /// Floating-point work of the whole grid, dominated by kernel assembly and
    /// the Cholesky factorization.
    pub fn flops(&self) -> f64 {
        let levels = self.xi.len() - 1;
        let parts: usize = (1..=levels).map(partition_count).sum();
        let inner = (parts * self.d) as f64;
        let per_seed: f64 = self
            .ns
            .iter()
            .map(|&n| {
                let n = n as f64;
                let nt = self.n_test as f64;
                n * n * n / 3.0 + 2.0 * n * n * inner + 2.0 * nt * n * inner + 4.0 * n * n
            })
            .sum();
        per_seed * (self.seeds * self.alphas.len()) as f64
    }

    /// Wall-clock estimate assuming `rate` flop/s on one core.
    pub fn estimate_seconds(&self, rate: f64) -> f64 {
        self.flops() / rate / rayon::current_num_threads() as f64
    }
}

fn partition_count(k: usize) -> usize {
    // p(k) by the pentagonal recurrence is overkill at these sizes
    fn rec(rest: usize, max: usize) -> usize {
        if rest == 0 {
            return 1;
        }
        (1..=rest.min(max)).map(|p| rec(rest - p, p)).sum()
    }
    rec(k, k)
}

/// Conservative single-core throughput used by the budget gate.
pub const DEFAULT_FLOP_RATE: f64 = 5.0e9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiskRow {
    pub alpha: f64,
    pub n: usize,
    pub seed_count: usize,
    pub target: String,
    pub mean_risk: f64,
    /// Standard error of the mean over seeds.
    pub std_err: f64,
    /// `mean_risk / ‖f*‖²`.
    pub relative_risk: f64,
    pub theory_risk: f64,
    pub theory_mode: TheoryMode,
    /// Per-seed Monte-Carlo means, in seed order.
    pub per_seed: Vec<f64>,
}

/// Runs every `(α, n, seed)` cell. Rows come out ordered by target, then `α`, then `n`.
pub fn run_risk_grid(grid: &RiskGrid) -> Result<Vec<RiskRow>> {
    grid.validate()?;
    let spec = KernelSpec::hermite(grid.xi.clone())?;
    let mut rows = Vec::new();
    // cells[a][i][s][t]
    let mut cells = Vec::with_capacity(grid.alphas.len());
    for &alpha in &grid.alphas {
        let cov = CovarianceSpec::build(grid.d, alpha)?;
        let kernel = HermiteKernel::new(&spec, &cov)?;
        let targets = grid.targets.iter().map(|t| make_target(t, &cov)).collect::<Result<Vec<_>>>()?;
        let mut per_n = Vec::with_capacity(grid.ns.len());
        for &n in &grid.ns {
            let per_seed: Vec<Vec<f64>> = (0..grid.seeds as u64)
                .into_par_iter()
                .map(|s| {
                    let data = Dataset::sample(n, &cov, derive_seed(grid.master_seed, &[TRAIN, s, n as u64]))?;
                    let solver = KrrSolver::new(kernel.clone(), data.z.clone(), grid.lambda)?;
                    let models = targets
                        .iter()
                        .map(|t| solver.fit(&data.clone().label(t, grid.noise_sigma)?.y))
                        .collect::<Result<Vec<_>>>()?;
                    let pairs: Vec<_> = models.iter().zip(&targets).collect();
                    let est = excess_risk_mc_shared(&pairs, &cov, grid.n_test, derive_seed(grid.master_seed, &[TEST, s]))?;
                    Ok(est.into_iter().map(|e| e.mean).collect())
                })
                .collect::<Result<_>>()?;
            per_n.push(per_seed);
        }
        cells.push((cov, targets, per_n));
    }
    for (t, kind) in grid.targets.iter().enumerate() {
        for (a, &alpha) in grid.alphas.iter().enumerate() {
            let (cov, targets, per_n) = &cells[a];
            let target = &targets[t];
            for (i, &n) in grid.ns.iter().enumerate() {
                let per_seed: Vec<f64> = per_n[i].iter().map(|v| v[t]).collect();
                let (mean, std_err) = seed_stats(&per_seed);
                let theory_risk = theory_prediction(grid, &spec, cov, target, n, grid.theory_mode)?;
                let norm = target.norm_sq();
                rows.push(RiskRow {
                    alpha,
                    n,
                    seed_count: grid.seeds,
                    target: kind.label(),
                    mean_risk: mean,
                    std_err,
                    relative_risk: if norm > 0.0 { mean / norm } else { f64::NAN },
                    theory_risk,
                    theory_mode: grid.theory_mode,
                    per_seed,
                });
            }
        }
    }
    Ok(rows)
}

/// Mean and standard error of the mean.
pub fn seed_stats(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Predicted squared risk at sample size `n`.
pub fn theory_prediction(
    grid: &RiskGrid,
    spec: &KernelSpec,
    cov: &CovarianceSpec,
    target: &crate::krr::TargetFunction,
    n: usize,
    mode: TheoryMode,
) -> Result<f64> {
    let part = partition(cov, spec, &Regime::from_samples(n, grid.d)?, grid.delta0)?;
    let pred = effective_risk(
        &part,
        &target.hermite_coefficients(),
        n as f64,
        grid.lambda,
        spec,
        cov,
        mode,
        HighResidual::Auto,
    )?;
    Ok(pred.predicted_risk)
}
