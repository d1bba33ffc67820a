use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};

/// A positive integer carried together with its prime factorization.
///
/// Moduli in the construction run to hundreds of digits but are always
/// assembled from known primes, so they are never re-factored: the exponent
/// vector is the source of truth and `value` is kept in sync with it.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FactoredInt {
    value: BigUint,
    factors: Vec<(u64, u32)>,
}

impl FactoredInt {
    pub fn one() -> Self {
        FactoredInt {
            value: BigUint::one(),
            factors: Vec::new(),
        }
    }

    /// Builds from `(prime, exponent)` pairs in any order; repeated primes are
    /// merged and zero exponents dropped. The caller guarantees primality.
    pub fn from_prime_powers(pairs: impl IntoIterator<Item = (u64, u32)>) -> Self {
        let mut factors: Vec<(u64, u32)> = pairs.into_iter().filter(|&(_, e)| e > 0).collect();
        factors.sort_unstable_by_key(|&(p, _)| p);
        factors.dedup_by(|next, prev| {
            if next.0 == prev.0 {
                prev.1 += next.1;
                true
            } else {
                false
            }
        });
        let value = product(&factors);
        FactoredInt { value, factors }
    }

    pub fn value(&self) -> &BigUint {
        &self.value
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    pub fn exponent_of(&self, p: u64) -> u32 {
        self.factors
            .binary_search_by_key(&p, |&(q, _)| q)
            .map_or(0, |i| self.factors[i].1)
    }

    /// Largest prime factor; 1 for the integer 1.
    pub fn largest_prime(&self) -> u64 {
        self.factors.last().map_or(1, |&(p, _)| p)
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    fn merge(&self, other: &Self, f: impl Fn(u32, u32) -> u32) -> Self {
        let (a, b) = (&self.factors, &other.factors);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        while i < a.len() || j < b.len() {
            let next = match (a.get(i), b.get(j)) {
                (Some(&(p, e)), Some(&(q, g))) if p == q => {
                    i += 1;
                    j += 1;
                    (p, f(e, g))
                }
                (Some(&(p, e)), Some(&(q, _))) if p < q => {
                    i += 1;
                    (p, f(e, 0))
                }
                (Some(_), Some(&(q, g))) => {
                    j += 1;
                    (q, f(0, g))
                }
                (Some(&(p, e)), None) => {
                    i += 1;
                    (p, f(e, 0))
                }
                (None, Some(&(q, g))) => {
                    j += 1;
                    (q, f(0, g))
                }
                (None, None) => unreachable!(),
            };
            if next.1 > 0 {
                out.push(next);
            }
        }
        let value = product(&out);
        FactoredInt { value, factors: out }
    }

    /// Least common multiple by exponent-wise maximum.
    pub fn lcm(&self, other: &Self) -> Self {
        self.merge(other, u32::max)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.merge(other, |a, b| a + b)
    }

    /// `self / p^e`, or `None` when `p^e` does not divide `self`.
    pub fn div_prime_power(&self, p: u64, e: u32) -> Option<Self> {
        if self.exponent_of(p) < e {
            return None;
        }
        let divisor = FactoredInt::from_prime_powers([(p, e)]);
        Some(self.merge(&divisor, |a, b| a - b))
    }

    /// The quotient `self / other` when `other` divides `self`.
    pub fn checked_div(&self, other: &Self) -> Option<Self> {
        if other
            .factors
            .iter()
            .any(|&(p, e)| self.exponent_of(p) < e)
        {
            return None;
        }
        Some(self.merge(other, |a, b| a - b))
    }

    pub fn odd_part(&self) -> Self {
        FactoredInt::from_prime_powers(self.factors.iter().copied().filter(|&(p, _)| p != 2))
    }

    /// Whether `n` divides `self`.
    pub fn divisible_by(&self, n: &BigUint) -> bool {
        !n.is_zero() && (&self.value % n).is_zero()
    }

    /// Factors a divisor `d` of `self` over the primes of `self`.
    ///
    /// Returns `None` if `d` is zero or does not divide `self`.
    pub fn factor_divisor(&self, d: &BigUint) -> Option<Self> {
        if !self.divisible_by(d) {
            return None;
        }
        let mut rest = d.clone();
        let mut out = Vec::new();
        for &(p, _) in &self.factors {
            if rest.is_one() {
                break;
            }
            let pb = BigUint::from(p);
            let mut e = 0;
            loop {
                let (q, r) = rest.div_rem(&pb);
                if !r.is_zero() {
                    break;
                }
                rest = q;
                e += 1;
            }
            if e > 0 {
                out.push((p, e));
            }
        }
        debug_assert!(rest.is_one());
        Some(FactoredInt {
            value: d.clone(),
            factors: out,
        })
    }
}

fn product(factors: &[(u64, u32)]) -> BigUint {
    // multiply in a balanced tree so large moduli stay cheap to build
    fn go(f: &[(u64, u32)]) -> BigUint {
        match f.len() {
            0 => BigUint::one(),
            1 => BigUint::from(f[0].0).pow(f[0].1),
            n => go(&f[..n / 2]) * go(&f[n / 2..]),
        }
    }
    go(factors)
}

impl fmt::Display for FactoredInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|&(p, e)| if e == 1 { p.to_string() } else { format!("{p}^{e}") })
            .collect();
        write!(f, "{}", parts.join("*"))
    }
}

impl fmt::Debug for FactoredInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FactoredInt({} = {})", self, self.value)
    }
}
