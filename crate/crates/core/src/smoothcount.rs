//! Counting integer tuples with bounded product, and the size of the
//! low-frequency index set.
//!
//! `X_D(L)` counts `1 ≤ i_1 ≤ ... ≤ i_D ≤ d` with `i_1 ⋯ i_D ≤ L`. Under the
//! power law, `σ^β` depends on `β` only through `Π_j j^{β_j}`, so these
//! counts are exactly the level sizes of threshold sets such as `Low(n)`.

use std::collections::HashMap;

use serde::Serialize;

use crate::covariance::CovarianceSpec;
use crate::error::{Error, Result};
use crate::multiindex::{self, MultiIndex};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CountQuery {
    /// Tuple length `D ≥ 1`.
    pub length: usize,
    /// Product threshold `L ≥ 1`.
    pub threshold: f64,
    /// Largest allowed entry `d ≥ 1`.
    pub max_value: u64,
}

impl CountQuery {
    pub fn new(length: usize, threshold: f64, max_value: u64) -> Result<Self> {
        if length == 0 || max_value == 0 || !(threshold >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need length >= 1, threshold >= 1, max_value >= 1; got ({length}, {threshold}, {max_value})"
            )));
        }
        Ok(CountQuery { length, threshold, max_value })
    }

    /// Products are integers, so `Π ≤ L` iff `Π ≤ ⌊L⌋`.
    fn bound(&self) -> u64 {
        if self.threshold >= u64::MAX as f64 {
            u64::MAX
        } else {
            self.threshold.floor() as u64
        }
    }
}

/// Non-decreasing tuples, by fixing the smallest entry and recursing on the rest.
pub fn count_recursive(q: &CountQuery) -> u128 {
    fn rec(len: usize, bound: u64, min: u64, d: u64, memo: &mut HashMap<(usize, u64, u64), u128>) -> u128 {
        if len == 0 {
            return 1;
        }
        if let Some(&v) = memo.get(&(len, bound, min)) {
            return v;
        }
        let mut total = 0u128;
        let mut i = min;
        // the remaining len entries are all >= i, so i^len must fit under the bound
        while i <= d && pow_le(i, len, bound) {
            total += rec(len - 1, bound / i, i, d, memo);
            i += 1;
        }
        memo.insert((len, bound, min), total);
        total
    }
    rec(q.length, q.bound(), 1, q.max_value, &mut HashMap::new())
}

fn pow_le(base: u64, exp: usize, bound: u64) -> bool {
    let mut acc: u64 = 1;
    for _ in 0..exp {
        match acc.checked_mul(base) {
            Some(v) if v <= bound => acc = v,
            _ => return false,
        }
    }
    true
}

/// Free-sum variant `X_D(L) = Σ_{i=1}^{d} X_{D-1}(⌊L/i⌋)`: counts all ordered
/// tuples in `[d]^D`, i.e. without the `i_1 ≤ ... ≤ i_D` restriction.
pub fn count_unrestricted(q: &CountQuery) -> u128 {
    fn rec(len: usize, bound: u64, d: u64, memo: &mut HashMap<(usize, u64), u128>) -> u128 {
        if len == 0 {
            return 1;
        }
        if let Some(&v) = memo.get(&(len, bound)) {
            return v;
        }
        let top = d.min(bound);
        let total = (1..=top).map(|i| rec(len - 1, bound / i, d, memo)).sum();
        memo.insert((len, bound), total);
        total
    }
    rec(q.length, q.bound(), q.max_value, &mut HashMap::new())
}

/// Cap on `d^D` for [`count_bruteforce`].
pub const BRUTEFORCE_CAP: u128 = 10_000_000;

/// Walks every tuple of `[d]^D` and counts the non-decreasing ones under the threshold.
pub fn count_bruteforce(q: &CountQuery) -> Result<u128> {
    let total = (q.max_value as u128)
        .checked_pow(q.length as u32)
        .unwrap_or(u128::MAX);
    if total > BRUTEFORCE_CAP {
        return Err(Error::ResourceCap { requested: total, cap: BRUTEFORCE_CAP });
    }
    let mut t = vec![1u64; q.length];
    let mut count = 0u128;
    loop {
        let sorted = t.windows(2).all(|w| w[0] <= w[1]);
        let prod: f64 = t.iter().map(|&v| v as f64).product();
        if sorted && prod <= q.threshold {
            count += 1;
        }
        // odometer increment
        let mut pos = q.length;
        loop {
            if pos == 0 {
                return Ok(count);
            }
            pos -= 1;
            if t[pos] < q.max_value {
                t[pos] += 1;
                break;
            }
            t[pos] = 1;
        }
    }
}

/// Every `β` with `|β| ≤ max_degree` and `ln σ^β > ln_threshold`, canonical order.
///
/// Depth-first over coordinates; because `σ` is non-increasing, a coordinate
/// that fails the threshold ends the scan for all later ones.
pub fn collect_low_set(cov: &CovarianceSpec, ln_threshold: f64, max_degree: usize) -> Vec<MultiIndex> {
    let ln_sigma = cov.ln_sigma();
    let d = cov.d();
    let mut out = Vec::new();
    if 0.0 <= ln_threshold {
        return out;
    }
    fn rec(
        ln_sigma: &[f64],
        d: usize,
        start: usize,
        remaining: u32,
        cur_ln: f64,
        thr: f64,
        cur: &mut Vec<(usize, u32)>,
        out: &mut Vec<MultiIndex>,
    ) {
        out.push(MultiIndex::from_pairs(d, cur.iter().copied()).expect("valid by construction"));
        if remaining == 0 {
            return;
        }
        for j in start..=d {
            if cur_ln + ln_sigma[j - 1] <= thr {
                break;
            }
            for e in 1..=remaining {
                let ln = cur_ln + e as f64 * ln_sigma[j - 1];
                if ln <= thr {
                    break;
                }
                cur.push((j, e));
                rec(ln_sigma, d, j + 1, remaining - e, ln, thr, cur, out);
                cur.pop();
            }
        }
    }
    rec(&ln_sigma, d, 1, max_degree as u32, 0.0, ln_threshold, &mut Vec::new(), &mut out);
    out.sort();
    out
}

/// `ln` of the Low/High threshold `d^{-(κ+δ0)}`.
pub fn ln_low_threshold(d: usize, kappa: f64, delta0: f64) -> f64 {
    -(kappa + delta0) * (d as f64).ln()
}

/// `D(κ) = ⌊κ/(1-α)⌋`.
pub fn degree_cap(kappa: f64, alpha: f64) -> usize {
    (kappa / (1.0 - alpha) + 1e-12).floor() as usize
}

const INTEGER_TOL: f64 = 1e-9;

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() <= INTEGER_TOL
}

/// Reasons the regime `κ ∉ Z`, `D(κ)(1-α) < κ`, `α ∈ [0, 1)` fails, if any.
pub fn regime_violations(alpha: f64, kappa: f64) -> Vec<String> {
    let mut v = Vec::new();
    if !(0.0..1.0).contains(&alpha) {
        v.push(format!("alpha = {alpha} is outside [0, 1)"));
        return v;
    }
    if !(kappa > 0.0) {
        v.push(format!("kappa = {kappa} must be positive"));
        return v;
    }
    if is_integer(kappa) {
        v.push(format!("kappa = {kappa} is an integer"));
    }
    if is_integer(kappa / (1.0 - alpha)) {
        v.push(format!("D(kappa)(1 - alpha) = kappa at kappa = {kappa}, alpha = {alpha}"));
    }
    v
}

#[derive(Clone, Debug, Serialize)]
pub struct LowSetReport {
    pub count: usize,
    pub max_degree_present: usize,
    /// `n = d^κ`.
    pub n: f64,
    /// `n^{1-δ0'}`.
    pub bound: f64,
    pub d_kappa: usize,
    pub scanned_degree: usize,
}

/// `|Low(n)|` for `n = d^κ`, scanning degrees up to `l_trunc`.
pub fn low_set_cardinality(
    cov: &CovarianceSpec,
    kappa: f64,
    delta0: f64,
    l_trunc: usize,
    delta0_prime: f64,
) -> Result<LowSetReport> {
    let alpha = cov
        .alpha()
        .ok_or_else(|| Error::AssumptionViolation("low-set bound needs a power-law covariance".into()))?;
    let bad = regime_violations(alpha, kappa);
    if !bad.is_empty() {
        return Err(Error::AssumptionViolation(bad.join("; ")));
    }
    let low = collect_low_set(cov, ln_low_threshold(cov.d(), kappa, delta0), l_trunc);
    let n = (cov.d() as f64).powf(kappa);
    Ok(LowSetReport {
        count: low.len(),
        max_degree_present: low.iter().map(|b| b.degree()).max().unwrap_or(0),
        n,
        bound: n.powf(1.0 - delta0_prime),
        d_kappa: degree_cap(kappa, alpha),
        scanned_degree: l_trunc,
    })
}

/// `|Low(n)|` per level via `X_k`, for `α > 0`: `σ^β > d^{-(κ+δ0)}` iff
/// `Π j^{β_j} < (d^{κ+δ0} C_α^k)^{1/α}`.
pub fn low_set_level_counts_via_products(
    cov: &CovarianceSpec,
    kappa: f64,
    delta0: f64,
    max_degree: usize,
) -> Result<Vec<u128>> {
    let alpha = cov
        .alpha()
        .filter(|a| *a > 0.0)
        .ok_or_else(|| Error::AssumptionViolation("product form needs alpha > 0".into()))?;
    let d = cov.d();
    let mut counts = vec![if 0.0 > ln_low_threshold(d, kappa, delta0) { 1 } else { 0 }];
    for k in 1..=max_degree {
        let ln_l = ((kappa + delta0) * (d as f64).ln() + k as f64 * cov.c_alpha().ln()) / alpha;
        if ln_l <= 0.0 {
            counts.push(0);
            continue;
        }
        let l = ln_l.exp();
        // strict inequality on integer products: step just below an integer threshold
        let threshold = if is_integer(l) { l.round() - 0.5 } else { l };
        if threshold < 1.0 {
            counts.push(0);
            continue;
        }
        counts.push(count_recursive(&CountQuery::new(k, threshold, d as u64)?));
    }
    Ok(counts)
}

/// `C(d + D, D)` cap used by the invariant `|Low| ≤ C(d + D(κ), D(κ))`.
pub fn low_set_trivial_bound(d: usize, degree: usize) -> Result<u128> {
    multiindex::count_up_to(d, degree)
}
