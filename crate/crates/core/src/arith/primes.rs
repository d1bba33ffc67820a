//! Prime enumeration, smallest-prime-factor tables and small-integer
//! factorization.

use std::cmp::Ordering;
use std::fmt;

use super::FactoredInt;

/// Smallest-prime-factor table for `0..=limit`.
///
/// Entry `n` holds the least prime dividing `n` (entries 0 and 1 hold 0).
#[derive(Clone)]
pub struct SpfTable {
    spf: Vec<u32>,
    primes: Vec<u32>,
}

impl SpfTable {
    /// Linear sieve; every composite is struck exactly once.
    pub fn new(limit: u64) -> Self {
        let limit = usize::try_from(limit).expect("sieve limit exceeds address space");
        assert!(limit < u32::MAX as usize, "sieve limit must fit in u32");
        let mut spf = vec![0u32; limit + 1];
        let mut primes = Vec::new();
        for i in 2..=limit {
            if spf[i] == 0 {
                spf[i] = i as u32;
                primes.push(i as u32);
            }
            let si = spf[i];
            for &p in &primes {
                let m = i * p as usize;
                if p > si || m > limit {
                    break;
                }
                spf[m] = p;
            }
        }
        SpfTable { spf, primes }
    }

    pub fn limit(&self) -> u64 {
        (self.spf.len() - 1) as u64
    }

    pub fn covers(&self, n: u64) -> bool {
        n <= self.limit()
    }

    /// Least prime factor of `2 <= n <= limit`.
    #[inline]
    pub fn spf(&self, n: u64) -> u64 {
        self.spf[n as usize] as u64
    }

    pub fn primes(&self) -> &[u32] {
        &self.primes
    }

    pub fn is_prime(&self, n: u64) -> bool {
        n >= 2 && self.spf(n) == n
    }

    /// Prime-exponent pairs of `n` in increasing prime order.
    pub fn factor_pairs(&self, mut n: u64) -> Vec<(u64, u32)> {
        let mut out: Vec<(u64, u32)> = Vec::new();
        while n > 1 {
            let p = self.spf(n);
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        out
    }
}

impl fmt::Debug for SpfTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpfTable").field("limit", &self.limit()).finish()
    }
}

fn trial_division_pairs(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut push = |p: u64, n: &mut u64| {
        let mut e = 0;
        while *n % p == 0 {
            *n /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
    };
    push(2, &mut n);
    push(3, &mut n);
    let mut d = 5u64;
    while d.saturating_mul(d) <= n {
        push(d, &mut n);
        push(d + 2, &mut n);
        d += 6;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Full factorization of `n >= 1`; table-driven when `table` covers `n`,
/// trial division otherwise.
pub fn factorize(n: u64, table: Option<&SpfTable>) -> FactoredInt {
    assert!(n >= 1, "factorize requires n >= 1");
    let pairs = match table {
        Some(t) if t.covers(n) => t.factor_pairs(n),
        _ => trial_division_pairs(n),
    };
    FactoredInt::from_prime_powers(pairs)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    matches!(trial_division_pairs(n).as_slice(), [(p, 1)] if *p == n)
}

/// Largest prime factor, with `P(1) = 1`.
pub fn largest_prime_factor(n: u64) -> u64 {
    assert!(n >= 1);
    trial_division_pairs(n).last().map_or(1, |&(p, _)| p)
}

/// Least prime factor of an integer; `p(1)` is infinite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LeastPrime {
    Prime(u64),
    Infinite,
}

impl Ord for LeastPrime {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (LeastPrime::Infinite, LeastPrime::Infinite) => Ordering::Equal,
            (LeastPrime::Infinite, _) => Ordering::Greater,
            (_, LeastPrime::Infinite) => Ordering::Less,
            (LeastPrime::Prime(a), LeastPrime::Prime(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for LeastPrime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn least_prime_factor(n: u64) -> LeastPrime {
    assert!(n >= 1);
    trial_division_pairs(n)
        .first()
        .map_or(LeastPrime::Infinite, |&(p, _)| LeastPrime::Prime(p))
}

/// The `l` with `p^l` exactly dividing `n`.
pub fn exact_multiplicity(mut n: u64, p: u64) -> u32 {
    assert!(n >= 1 && p >= 2);
    let mut l = 0;
    while n % p == 0 {
        n /= p;
        l += 1;
    }
    l
}

pub fn is_k_free(n: u64, k: u32) -> bool {
    assert!(k >= 2);
    trial_division_pairs(n).iter().all(|&(_, e)| e < k)
}

/// Primes in the closed interval `[lo, hi]`, ascending (segmented sieve).
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    if hi < 2 || lo > hi {
        return Vec::new();
    }
    let lo = lo.max(2);
    let root = integer_sqrt(hi);
    let mut base = vec![true; root as usize + 1];
    let mut base_primes = Vec::new();
    for i in 2..=root as usize {
        if base[i] {
            base_primes.push(i as u64);
            let mut j = i * i;
            while j <= root as usize {
                base[j] = false;
                j += i;
            }
        }
    }
    let len = (hi - lo + 1) as usize;
    let mut alive = vec![true; len];
    for &p in &base_primes {
        let start = (p * p).max(lo.div_ceil(p) * p);
        let mut m = start;
        while m <= hi {
            alive[(m - lo) as usize] = false;
            m += p;
        }
    }
    alive
        .iter()
        .enumerate()
        .filter(|&(_, &a)| a)
        .map(|(i, _)| lo + i as u64)
        .collect()
}

/// Smallest prime strictly greater than `n`.
pub fn next_prime(n: u64) -> u64 {
    let mut c = n + 1;
    while !is_prime(c) {
        c += 1;
    }
    c
}

pub fn integer_sqrt(n: u64) -> u64 {
    let n = n as u128;
    let mut r = (n as f64).sqrt() as u128;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r as u64
}
