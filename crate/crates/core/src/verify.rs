//! Independent certification of a claimed representation `r = Σ_{n ∈ S} 1/n`.
//!
//! The sum is recomputed by pairwise balanced-tree reduction of reduced
//! fractions, a different path from the fixed-denominator accumulation the
//! constructor uses.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::arith::ExactRational;
use crate::dickman::{c_of_r, density_upper_bound};

/// Below this bound harmonic tails are summed exactly.
pub const EXACT_HARMONIC_LIMIT: u64 = 10_000;

/// Outcome of [`check`]. Failures are fields, never errors.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub sum_exact: bool,
    pub distinct: bool,
    pub max_ok: bool,
    /// `|S| / x` (zero when `x = 0`).
    pub density: ExactRational,
    pub harmonic_bound_ok: bool,
    pub comparisons: Comparisons,
    /// The recomputed sum, when every element is positive.
    pub sum: Option<ExactRational>,
    pub size: usize,
    pub max_element: u64,
}

/// Floating reference values the density is compared against.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparisons {
    pub density_approx: f64,
    /// `C(r) - η`, absent when `r` is not positive.
    pub c_of_r_minus_eta: Option<f64>,
    pub upper_bound_1_minus_e_to_minus_r: f64,
}

impl Certificate {
    /// Sum, distinctness and bound all hold.
    pub fn passed(&self) -> bool {
        self.sum_exact && self.distinct && self.max_ok && self.harmonic_bound_ok
    }
}

/// Sum of `1/n` over `items` by balanced pairwise reduction. `None` if some
/// element is zero.
pub fn tree_sum(items: &[u64]) -> Option<ExactRational> {
    if items.contains(&0) {
        return None;
    }
    Some(ExactRational::from(tree(items, &|n| {
        BigRational::new(BigInt::from(1u8), BigInt::from(n))
    })))
}

fn tree(items: &[u64], leaf: &(dyn Fn(u64) -> BigRational + Sync)) -> BigRational {
    match items.len() {
        0 => BigRational::zero(),
        1 => leaf(items[0]),
        len => {
            let (lo, hi) = items.split_at(len / 2);
            let (a, b) = if len > 2048 {
                rayon::join(|| tree(lo, leaf), || tree(hi, leaf))
            } else {
                (tree(lo, leaf), tree(hi, leaf))
            };
            a + b
        }
    }
}

/// `H(x) - H(x - m) <= r`, i.e. the `m` largest unit fractions up to `x`
/// sum to at most `r`. No set of `m` distinct integers up to `x` can have a
/// smaller reciprocal sum.
pub fn harmonic_bound_holds(r: &ExactRational, m: u64, x: u64) -> bool {
    if m > x {
        return false;
    }
    if m == 0 {
        return !r.is_negative();
    }
    let lo = x - m + 1;
    if x > EXACT_HARMONIC_LIMIT {
        // f64 sum of m terms: each term and each addition has relative
        // error <= 2^-53, so the total error is below (m + 1) 2^-52 · sum.
        let approx: f64 = (lo..=x).rev().map(|n| 1.0 / n as f64).sum();
        let slack = approx * (m as f64 + 1.0) * f64::EPSILON * 2.0;
        let rf = r.to_f64();
        let r_slack = rf.abs() * f64::EPSILON * 2.0;
        if approx + slack < rf - r_slack {
            return true;
        }
        if approx - slack > rf + r_slack {
            return false;
        }
    }
    let range: Vec<u64> = (lo..=x).collect();
    tree_sum(&range).expect("positive range") <= *r
}

/// Certifies `S` as a representation of `r` by integers at most `x`,
/// comparing the density against `C(r) - eta`.
pub fn check_with_eta(r: &ExactRational, s: &[u64], x: u64, eta: f64) -> Certificate {
    let size = s.len();
    let max_element = s.iter().copied().max().unwrap_or(0);
    let mut seen = HashSet::with_capacity(size);
    let distinct = s.iter().all(|&n| seen.insert(n));
    let max_ok = s.iter().all(|&n| n >= 1 && n <= x);
    let sum = tree_sum(s);
    let sum_exact = sum.as_ref() == Some(r);
    let density = if x == 0 {
        ExactRational::zero()
    } else {
        ExactRational::new(size as u64, x).expect("x > 0")
    };
    let harmonic_bound_ok = harmonic_bound_holds(r, size as u64, x);
    let rf = r.to_f64();
    Certificate {
        sum_exact,
        distinct,
        max_ok,
        comparisons: Comparisons {
            density_approx: density.to_f64(),
            c_of_r_minus_eta: c_of_r(rf).ok().map(|c| c - eta),
            upper_bound_1_minus_e_to_minus_r: density_upper_bound(rf),
        },
        density,
        harmonic_bound_ok,
        sum,
        size,
        max_element,
    }
}

/// [`check_with_eta`] with `eta = 0`.
pub fn check(r: &ExactRational, s: &[u64], x: u64) -> Certificate {
    check_with_eta(r, s, x, 0.0)
}
