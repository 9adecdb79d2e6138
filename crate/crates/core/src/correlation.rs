//! Kendall rank correlation with explicit tie accounting.
//!
//! The fast path sorts the pairs by `(x, y)` and counts discordant pairs as
//! the inversions of the resulting `y` sequence with a bottom-up merge sort,
//! `O(n log n)` overall. [`kendall_tau_b_bruteforce`] enumerates all pairs
//! and serves as the reference.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which side of a sample has every value tied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Degeneracy {
    X,
    Y,
    Both,
}

impl fmt::Display for Degeneracy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Degeneracy::X => "x degenerate",
            Degeneracy::Y => "y degenerate",
            Degeneracy::Both => "x and y degenerate",
        })
    }
}

/// A correlation value, or the reason it does not exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Tau {
    Defined(f64),
    Undefined(Degeneracy),
}

impl Tau {
    pub fn value(self) -> Option<f64> {
        match self {
            Tau::Defined(v) => Some(v),
            Tau::Undefined(_) => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Tau::Defined(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TauVariant {
    /// `(C - D) / (n (n - 1) / 2)`, no tie correction.
    #[serde(rename = "a")]
    A,
    #[default]
    #[serde(rename = "b")]
    B,
}

impl std::str::FromStr for TauVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(TauVariant::A),
            "b" => Ok(TauVariant::B),
            other => Err(Error::Config(format!(
                "unknown tau variant {other:?} (expected a or b)"
            ))),
        }
    }
}

/// Classification of all `n (n - 1) / 2` pairs of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairCounts {
    pub concordant: u64,
    pub discordant: u64,
    pub tied_x_only: u64,
    pub tied_y_only: u64,
    pub tied_both: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.concordant + self.discordant + self.tied_x_only + self.tied_y_only + self.tied_both
    }

    fn degeneracy(&self) -> Option<Degeneracy> {
        let cd = self.concordant + self.discordant;
        // every pair tied in x leaves no concordant, discordant or y-only pairs
        let x_flat = cd + self.tied_y_only == 0;
        let y_flat = cd + self.tied_x_only == 0;
        match (x_flat, y_flat) {
            (true, true) => Some(Degeneracy::Both),
            (true, false) => Some(Degeneracy::X),
            (false, true) => Some(Degeneracy::Y),
            (false, false) => None,
        }
    }

    pub fn tau_b(&self) -> Tau {
        if let Some(d) = self.degeneracy() {
            return Tau::Undefined(d);
        }
        let cd = self.concordant + self.discordant;
        let num = self.concordant as f64 - self.discordant as f64;
        let fx = (cd + self.tied_x_only) as f64;
        let fy = (cd + self.tied_y_only) as f64;
        Tau::Defined(num / (fx * fy).sqrt())
    }

    pub fn tau_a(&self) -> Tau {
        if let Some(d) = self.degeneracy() {
            return Tau::Undefined(d);
        }
        let num = self.concordant as f64 - self.discordant as f64;
        Tau::Defined(num / self.total() as f64)
    }

    pub fn tau(&self, variant: TauVariant) -> Tau {
        match variant {
            TauVariant::A => self.tau_a(),
            TauVariant::B => self.tau_b(),
        }
    }
}

fn check_sample(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Validation(format!(
            "paired sample has {} x values and {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Singleton(xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite value in paired sample".into()));
    }
    Ok(())
}

fn cmp(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("finite values")
}

/// Sum of `t (t - 1) / 2` over runs of equal adjacent elements.
fn tied_pairs<T>(items: &[T], eq: impl Fn(&T, &T) -> bool) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in items.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `values` ascending and returns the number of strict inversions.
fn merge_sort_inversions<T: PartialOrd + Copy + Default>(values: &mut Vec<T>) -> u64 {
    let n = values.len();
    let mut buf = vec![T::default(); n];
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut out) = (start, mid, start);
            while i < mid && j < end {
                if values[i] > values[j] {
                    buf[out] = values[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    buf[out] = values[i];
                    i += 1;
                }
                out += 1;
            }
            buf[out..out + (mid - i)].copy_from_slice(&values[i..mid]);
            out += mid - i;
            buf[out..out + (end - j)].copy_from_slice(&values[j..end]);
            start = end;
        }
        std::mem::swap(values, &mut buf);
        width *= 2;
    }
    swaps
}

/// Pair classification in `O(n log n)`.
pub fn pair_counts(xs: &[f64], ys: &[f64]) -> Result<PairCounts> {
    check_sample(xs, ys)?;
    let n = xs.len() as u64;
    let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_by(|a, b| cmp(a.0, b.0).then_with(|| cmp(a.1, b.1)));

    let tied_x = tied_pairs(&pairs, |a, b| a.0 == b.0);
    let tied_xy = tied_pairs(&pairs, |a, b| a.0 == b.0 && a.1 == b.1);
    let mut y_sorted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let discordant = merge_sort_inversions(&mut y_sorted);
    let tied_y = tied_pairs(&y_sorted, |a, b| a == b);

    let all = n * (n - 1) / 2;
    Ok(PairCounts {
        concordant: all + tied_xy - tied_x - tied_y - discordant,
        discordant,
        tied_x_only: tied_x - tied_xy,
        tied_y_only: tied_y - tied_xy,
        tied_both: tied_xy,
    })
}

/// τ between positions `0..n` and a permutation of them (no ties possible),
/// from the inversion count alone. Undefined for fewer than two items.
pub fn permutation_tau(order: &[usize]) -> Tau {
    let n = order.len() as u64;
    if n < 2 {
        return Tau::Undefined(Degeneracy::Both);
    }
    let inversions = merge_sort_inversions(&mut order.to_vec());
    PairCounts {
        concordant: n * (n - 1) / 2 - inversions,
        discordant: inversions,
        ..PairCounts::default()
    }
    .tau_b()
}

/// Pair classification by explicit enumeration of all pairs.
pub fn pair_counts_bruteforce(xs: &[f64], ys: &[f64]) -> Result<PairCounts> {
    check_sample(xs, ys)?;
    let mut c = PairCounts::default();
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let dx = cmp(xs[i], xs[j]);
            let dy = cmp(ys[i], ys[j]);
            match (dx, dy) {
                (Ordering::Equal, Ordering::Equal) => c.tied_both += 1,
                (Ordering::Equal, _) => c.tied_x_only += 1,
                (_, Ordering::Equal) => c.tied_y_only += 1,
                (a, b) if a == b => c.concordant += 1,
                _ => c.discordant += 1,
            }
        }
    }
    Ok(c)
}

/// Kendall's τ-b: `(C - D) / sqrt((C + D + Tx)(C + D + Ty))`.
///
/// Errors on fewer than two pairs or non-finite input; an all-tied side
/// gives [`Tau::Undefined`].
pub fn kendall_tau_b(xs: &[f64], ys: &[f64]) -> Result<Tau> {
    Ok(pair_counts(xs, ys)?.tau_b())
}

pub fn kendall_tau_b_bruteforce(xs: &[f64], ys: &[f64]) -> Result<Tau> {
    Ok(pair_counts_bruteforce(xs, ys)?.tau_b())
}

pub fn kendall_tau_a(xs: &[f64], ys: &[f64]) -> Result<Tau> {
    Ok(pair_counts(xs, ys)?.tau_a())
}

pub fn kendall_tau(xs: &[f64], ys: &[f64], variant: TauVariant) -> Result<Tau> {
    Ok(pair_counts(xs, ys)?.tau(variant))
}
