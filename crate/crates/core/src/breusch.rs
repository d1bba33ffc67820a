//! Terminal expansions: odd-denominator Egyptian fractions, the splitting
//! identity and the greedy baseline.

use std::collections::{HashMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::arith::{factorize, primes_in, ExactRational, FactoredInt};
use crate::error::{Error, Result};

/// Distinct odd denominators whose reciprocals sum to a given value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OddExpansion {
    /// Strictly increasing odd denominators.
    pub terms: Vec<u64>,
    /// The common modulus the expansion was found over; every term divides it.
    pub max_bound_used: u64,
    /// `5 · lcm{d, 3² · ∏_{3 < p <= P(d)} p}`.
    pub reference_bound: u64,
}

impl OddExpansion {
    pub fn max_term(&self) -> u64 {
        self.terms.last().copied().unwrap_or(0)
    }

    pub fn within_reference_bound(&self) -> bool {
        self.max_term() <= self.reference_bound
    }
}

/// Odd multipliers tried on the base modulus before giving up. The first
/// three keep every term within the reference bound.
const MULTIPLIERS: &[u64] = &[1, 3, 5, 7, 9, 11, 13, 15, 21, 25, 27, 33, 35, 45, 63];
const DP_LIMIT: u64 = 1 << 24;
const MITM_MAX_DIVISORS: usize = 40;

/// Writes `c/d` (with `d` odd and `c/d < 1/P(d)`) as a sum of reciprocals of
/// distinct odd integers.
///
/// Works over a modulus `M = L·t` where `L = lcm{d, 9 · ∏_{3<p<=P(d)} p}` and
/// `t` is a small odd multiplier: the numerator `c·M/d` is written as a sum
/// of distinct divisors `e` of `M`, each giving the term `M/e`.
pub fn expand_odd(c_over_d: &ExactRational) -> Result<OddExpansion> {
    expand_odd_within(c_over_d, u64::MAX, &HashSet::new())
}

/// [`expand_odd`] restricted to terms at most `max_term` and outside
/// `exclude`.
pub fn expand_odd_within(
    c_over_d: &ExactRational,
    max_term: u64,
    exclude: &HashSet<u64>,
) -> Result<OddExpansion> {
    let fail = |reason: String| Error::BreuschPreconditionFailed {
        value: c_over_d.to_string(),
        reason,
    };
    if !c_over_d.is_positive() {
        return Err(fail("value must be positive".into()));
    }
    let d = c_over_d
        .denom()
        .to_u64()
        .ok_or_else(|| fail("denominator exceeds 64 bits".into()))?;
    if d % 2 == 0 {
        return Err(fail("denominator is even".into()));
    }
    let c = c_over_d.numer().to_u64().ok_or_else(|| fail("value is not below 1".into()))?;
    let d_factored = factorize(d, None);
    let largest = d_factored.largest_prime();
    if (c as u128) * (largest as u128) >= d as u128 {
        return Err(fail(format!("value is not below 1/P(d) = 1/{largest}")));
    }

    let base = FactoredInt::from_prime_powers(
        std::iter::once((3, 2)).chain(primes_in(5, largest).into_iter().map(|p| (p, 1))),
    );
    let lcm = d_factored.lcm(&base);
    let lcm = lcm
        .value()
        .to_u64()
        .ok_or_else(|| fail("modulus exceeds 64 bits".into()))?;
    let reference_bound = lcm.saturating_mul(5);

    for &t in MULTIPLIERS {
        let Some(modulus) = lcm.checked_mul(t) else { break };
        let target = c as u128 * (modulus / d) as u128;
        let Ok(target) = u64::try_from(target) else { break };
        // largest first, so the search favours small terms
        let mut divisors: Vec<u64> = divisors_of(&factorize(modulus, None))
            .into_iter()
            .filter(|&e| e <= target && modulus / e <= max_term && !exclude.contains(&(modulus / e)))
            .collect();
        divisors.reverse();
        if let Some(parts) = divisor_subset_sum(&divisors, target) {
            let mut terms: Vec<u64> = parts.iter().map(|&e| modulus / e).collect();
            terms.sort_unstable();
            let check: ExactRational = terms.iter().map(|&n| ExactRational::unit(n)).sum();
            if &check != c_over_d || terms.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Invariant(format!("odd expansion of {c_over_d} re-sums to {check}")));
            }
            return Ok(OddExpansion {
                terms,
                max_bound_used: modulus,
                reference_bound,
            });
        }
    }
    Err(fail("no divisor decomposition found within the search limits".into()))
}

fn divisors_of(n: &FactoredInt) -> Vec<u64> {
    let mut out = vec![1u64];
    for &(p, e) in n.factors() {
        let len = out.len();
        let mut pk = 1u64;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                out.push(out[i] * pk);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Distinct members of `divisors` summing to `target`, preferring members
/// that come first.
fn divisor_subset_sum(divisors: &[u64], target: u64) -> Option<Vec<u64>> {
    if target == 0 {
        return Some(Vec::new());
    }
    if target > DP_LIMIT {
        // take large members greedily until the rest fits the table
        let mut rest = target;
        let mut taken = Vec::new();
        let mut i = 0;
        while rest > DP_LIMIT && i < divisors.len() {
            if divisors[i] <= rest - DP_LIMIT / 2 {
                rest -= divisors[i];
                taken.push(divisors[i]);
            }
            i += 1;
        }
        if rest <= DP_LIMIT {
            if let Some(mut more) = knapsack(&divisors[i..], rest) {
                more.extend(taken);
                return Some(more);
            }
        }
        if divisors.len() <= MITM_MAX_DIVISORS {
            return meet_in_middle(divisors, target);
        }
        return None;
    }
    knapsack(divisors, target)
}

/// 0/1 knapsack; `first[s]` is the item that first reached `s`.
fn knapsack(items: &[u64], target: u64) -> Option<Vec<u64>> {
    let t = target as usize;
    let mut first: Vec<u32> = vec![u32::MAX; t + 1];
    let mut reached = vec![false; t + 1];
    reached[0] = true;
    for (i, &e) in items.iter().enumerate() {
        let e = e as usize;
        if e > t {
            continue;
        }
        for s in (e..=t).rev() {
            if !reached[s] && reached[s - e] {
                reached[s] = true;
                first[s] = i as u32;
            }
        }
        if reached[t] {
            break;
        }
    }
    if !reached[t] {
        return None;
    }
    let mut out = Vec::new();
    let mut s = t;
    while s > 0 {
        let e = items[first[s] as usize];
        out.push(e);
        s -= e as usize;
    }
    Some(out)
}

fn meet_in_middle(items: &[u64], target: u64) -> Option<Vec<u64>> {
    let (lo, hi) = items.split_at(items.len() / 2);
    let mut left: HashMap<u64, u64> = HashMap::new();
    for mask in 0u64..(1 << lo.len()) {
        left.entry(subset_total(lo, mask)).or_insert(mask);
    }
    for mask in 0u64..(1 << hi.len()) {
        let s = subset_total(hi, mask);
        if s > target {
            continue;
        }
        if let Some(&lm) = left.get(&(target - s)) {
            let mut out = pick(lo, lm);
            out.extend(pick(hi, mask));
            return Some(out);
        }
    }
    None
}

fn subset_total(xs: &[u64], mask: u64) -> u64 {
    xs.iter()
        .enumerate()
        .filter(|&(i, _)| mask >> i & 1 == 1)
        .fold(0u64, |a, (_, &x)| a.saturating_add(x))
}

fn pick(xs: &[u64], mask: u64) -> Vec<u64> {
    xs.iter()
        .enumerate()
        .filter(|&(i, _)| mask >> i & 1 == 1)
        .map(|(_, &x)| x)
        .collect()
}

/// `1/n = 1/(n+1) + 1/(n(n+1))`.
pub fn split(n: u64) -> (u64, u64) {
    assert!(n >= 1);
    (n + 1, n * (n + 1))
}

/// Fibonacci–Sylvester greedy expansion: repeatedly subtract the largest
/// unit fraction not exceeding the remainder.
pub fn greedy_expand(c_over_d: &ExactRational) -> Result<Vec<BigUint>> {
    if !c_over_d.is_positive() {
        return Err(Error::Domain(format!("greedy expansion needs a positive value, got {c_over_d}")));
    }
    let mut num = c_over_d.numer().clone();
    let mut den = c_over_d.denom().clone();
    let mut terms = Vec::new();
    while !num.is_zero() {
        let n = den.div_ceil(&num);
        terms.push(n.to_biguint().expect("positive"));
        // num/den - 1/n = (num·n - den) / (den·n)
        let next_num = &num * &n - &den;
        assert!(next_num < num, "greedy numerators must strictly decrease");
        let next_den = &den * &n;
        let g = next_num.gcd(&next_den);
        if next_num.is_zero() {
            break;
        }
        num = next_num / &g;
        den = next_den / &g;
        if den.is_one() && num > BigInt::zero() {
            // an integer part: emit 1/1 repeatedly is not distinct
            return Err(Error::Domain(format!("{c_over_d} has an integer part >= 1 after greedy steps")));
        }
    }
    Ok(terms)
}
