//! Multi-indices `β ∈ Z^d_{≥0}` and their enumeration.
//!
//! A [`MultiIndex`] stores only its non-zero exponents, sorted by coordinate.
//! Coordinates are 1-based throughout, matching the `"j1^e1*j2^e2"` labels
//! used in reports.
//!
//! The canonical order groups indices by ascending degree; inside a degree,
//! the dense exponent vectors are compared lexicographically with larger
//! exponents first, so for `d = 2, D = 2` the order is
//! `(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)`.

use std::cmp::Ordering;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Default cap on the number of indices [`enumerate`] will materialize.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    dim: usize,
    // (coordinate, exponent), coordinates strictly increasing, exponents >= 1
    entries: Vec<(usize, u32)>,
}

impl MultiIndex {
    /// The zero index in dimension `dim`.
    pub fn zero(dim: usize) -> Self {
        MultiIndex { dim, entries: Vec::new() }
    }

    /// `p · e_j`, the index of a univariate Hermite polynomial of degree `p` in coordinate `j`.
    pub fn unit(dim: usize, coord: usize, power: u32) -> Result<Self> {
        Self::from_pairs(dim, [(coord, power)])
    }

    /// Builds an index from `(coordinate, exponent)` pairs in any order.
    ///
    /// Zero exponents are dropped; repeated coordinates are rejected.
    pub fn from_pairs<I>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, u32)>,
    {
        if dim == 0 {
            return Err(Error::InvalidMultiIndex("dimension must be positive".into()));
        }
        let mut entries: Vec<(usize, u32)> = pairs.into_iter().filter(|&(_, e)| e > 0).collect();
        entries.sort_unstable_by_key(|&(j, _)| j);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidMultiIndex(format!("coordinate {} repeated", w[0].0)));
            }
        }
        if let Some(&(j, _)) = entries.iter().find(|&&(j, _)| j == 0 || j > dim) {
            return Err(Error::InvalidMultiIndex(format!(
                "coordinate {j} outside [1, {dim}]"
            )));
        }
        Ok(MultiIndex { dim, entries })
    }

    pub fn from_dense(exponents: &[u32]) -> Result<Self> {
        Self::from_pairs(
            exponents.len(),
            exponents.iter().enumerate().map(|(i, &e)| (i + 1, e)),
        )
    }

    /// Parses the report format `"1^2*3^1"` (or `"0"` for the zero index).
    pub fn parse(s: &str, dim: usize) -> Result<Self> {
        let s = s.trim();
        if s == "0" {
            return Ok(Self::zero(dim));
        }
        let mut pairs = Vec::new();
        for factor in s.split('*') {
            let (j, e) = factor
                .split_once('^')
                .ok_or_else(|| Error::InvalidMultiIndex(format!("malformed factor {factor:?}")))?;
            let j: usize = j
                .trim()
                .parse()
                .map_err(|_| Error::InvalidMultiIndex(format!("bad coordinate in {factor:?}")))?;
            let e: u32 = e
                .trim()
                .parse()
                .map_err(|_| Error::InvalidMultiIndex(format!("bad exponent in {factor:?}")))?;
            if e == 0 {
                return Err(Error::InvalidMultiIndex(format!("zero exponent in {factor:?}")));
            }
            pairs.push((j, e));
        }
        Self::from_pairs(dim, pairs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.entries.iter().map(|&(_, e)| e as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exponent of coordinate `j` (1-based); zero when absent.
    pub fn get(&self, coord: usize) -> u32 {
        self.entries
            .binary_search_by_key(&coord, |&(j, _)| j)
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    /// Non-zero `(coordinate, exponent)` pairs in increasing coordinate order.
    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> Vec<u32> {
        let mut v = vec![0; self.dim];
        for &(j, e) in &self.entries {
            v[j - 1] = e;
        }
        v
    }

    /// `β!` = `β_1! ⋯ β_d!`.
    pub fn factorial_product(&self) -> Result<u128> {
        self.entries.iter().try_fold(1u128, |acc, &(_, e)| {
            acc.checked_mul(factorial(e as usize)?)
                .ok_or(Error::Overflow { what: "factorial product" })
        })
    }

    /// `|β|! / (β_1! ⋯ β_d!)`, built as a product of binomials so it stays
    /// exact as long as the result itself fits.
    pub fn multinomial(&self) -> Result<u128> {
        let mut acc = 1u128;
        let mut partial = 0usize;
        for &(_, e) in &self.entries {
            partial += e as usize;
            acc = acc
                .checked_mul(binomial(partial, e as usize)?)
                .ok_or(Error::Overflow { what: "multinomial" })?;
        }
        Ok(acc)
    }

    /// `Σ_j β_j ln σ_j`, i.e. `ln σ^β`. `ln_sigma` is indexed from coordinate 1.
    pub fn ln_power(&self, ln_sigma: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, e)| e as f64 * ln_sigma[j - 1]).sum()
    }

    /// `σ^β = Π σ_j^{β_j}`.
    pub fn power(&self, sigma: &[f64]) -> f64 {
        self.entries.iter().map(|&(j, e)| sigma[j - 1].powi(e as i32)).product()
    }

    /// Componentwise sum `β + γ`.
    pub fn add(&self, other: &MultiIndex) -> Result<MultiIndex> {
        self.check_dim(other)?;
        let mut dense = self.to_dense();
        for &(j, e) in &other.entries {
            dense[j - 1] += e;
        }
        MultiIndex::from_dense(&dense)
    }

    /// Componentwise `β ≤ γ`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.dim == other.dim && self.entries.iter().all(|&(j, e)| e <= other.get(j))
    }

    /// `β ≡ γ (mod 2)` componentwise.
    pub fn same_parity(&self, other: &MultiIndex) -> bool {
        self.dim == other.dim
            && self.entries.iter().all(|&(j, e)| (e + other.get(j)) % 2 == 0)
            && other.entries.iter().all(|&(j, e)| (e + self.get(j)) % 2 == 0)
    }

    fn check_dim(&self, other: &MultiIndex) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        Ok(())
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| {
                // dense vectors, larger exponent at the first differing coordinate first
                let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
                loop {
                    match (a.peek(), b.peek()) {
                        (None, None) => return Ordering::Equal,
                        (Some(_), None) => return Ordering::Less,
                        (None, Some(_)) => return Ordering::Greater,
                        (Some(&&(ja, ea)), Some(&&(jb, eb))) => {
                            if ja != jb {
                                return ja.cmp(&jb);
                            }
                            if ea != eb {
                                return eb.cmp(&ea);
                            }
                            a.next();
                            b.next();
                        }
                    }
                }
            })
            .then_with(|| self.dim.cmp(&other.dim))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str("0");
        }
        for (i, (j, e)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            write!(f, "{j}^{e}")?;
        }
        Ok(())
    }
}

impl Serialize for MultiIndex {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

pub fn factorial(n: usize) -> Result<u128> {
    (1..=n as u128).try_fold(1u128, |acc, k| {
        acc.checked_mul(k).ok_or(Error::Overflow { what: "factorial" })
    })
}

/// Exact binomial coefficient; errors only if the result does not fit in `u128`.
pub fn binomial(n: usize, k: usize) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc = 1u128;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiplication
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or(Error::Overflow { what: "binomial" })?
            / (i as u128 + 1);
    }
    Ok(acc)
}

/// `C(d + D, D)`, the number of indices with `|β| ≤ D`.
pub fn count_up_to(dim: usize, max_degree: usize) -> Result<u128> {
    binomial(dim + max_degree, max_degree)
}

/// Number of indices of degree exactly `k`: `C(d - 1 + k, k)`.
pub fn count_exact(dim: usize, degree: usize) -> Result<u128> {
    binomial(dim - 1 + degree, degree)
}

/// All indices with `|β| ≤ max_degree`, in canonical order.
pub fn enumerate(dim: usize, max_degree: usize) -> Result<Vec<MultiIndex>> {
    enumerate_with_cap(dim, max_degree, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_with_cap(dim: usize, max_degree: usize, cap: u128) -> Result<Vec<MultiIndex>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let total = count_up_to(dim, max_degree).unwrap_or(u128::MAX);
    if total > cap {
        return Err(Error::ResourceCap { requested: total, cap });
    }
    let mut out = Vec::with_capacity(total as usize);
    for k in 0..=max_degree {
        push_degree(dim, k, &mut out);
    }
    Ok(out)
}

/// All indices of degree exactly `degree`, in canonical order.
pub fn enumerate_degree(dim: usize, degree: usize) -> Result<Vec<MultiIndex>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let total = count_exact(dim, degree).unwrap_or(u128::MAX);
    if total > DEFAULT_ENUMERATION_CAP {
        return Err(Error::ResourceCap { requested: total, cap: DEFAULT_ENUMERATION_CAP });
    }
    let mut out = Vec::with_capacity(total as usize);
    push_degree(dim, degree, &mut out);
    Ok(out)
}

fn push_degree(dim: usize, degree: usize, out: &mut Vec<MultiIndex>) {
    fn rec(dim: usize, start: usize, remaining: u32, cur: &mut Vec<(usize, u32)>, out: &mut Vec<MultiIndex>) {
        if remaining == 0 {
            out.push(MultiIndex { dim, entries: cur.clone() });
            return;
        }
        for j in start..=dim {
            for e in (1..=remaining).rev() {
                cur.push((j, e));
                rec(dim, j + 1, remaining - e, cur, out);
                cur.pop();
            }
        }
    }
    rec(dim, 1, degree as u32, &mut Vec::with_capacity(degree), out);
}
