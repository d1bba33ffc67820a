//! Constrained smooth-number families.
//!
//! A family `A(x, y; w, λ)` holds the integers `n` with `λx < n <= x`,
//! `P(n) <= y`, `n` k-free, and every prime whose square divides `n` at most
//! `w`. The odd members that are not of the form `m² + m - 1` form the
//! subfamily `A₀`. Members whose largest prime is `p`, occurring to the exact
//! power `l`, form the slice for `p^l`.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_integer::Integer;
use rayon::prelude::*;

use crate::arith::{
    integer_sqrt, is_prime, primes_in, CommonDenominatorSum, ExactRational, FactoredInt, SpfTable,
};
use crate::error::{Error, Result};

/// Largest `x` a family may be built for unless the caller raises the budget.
pub const DEFAULT_MAX_X: u64 = 200_000_000;

/// Parameters `(x, y, w, λ, k)` of a family. `λ` is kept as the integer
/// cutoff `⌊λx⌋`; members are exactly the integers above it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmoothParams {
    pub x: u64,
    pub y: u64,
    pub w: u64,
    pub k: u32,
    pub cutoff: u64,
}

impl SmoothParams {
    pub fn new(x: u64, y: u64, w: u64, lambda: &ExactRational, k: u32) -> Result<Self> {
        if lambda.is_negative() || *lambda >= ExactRational::one() {
            return Err(Error::Parameter(format!("lambda must lie in [0, 1), got {lambda}")));
        }
        let scaled = lambda * &ExactRational::from(x);
        let cutoff = scaled.numer().div_floor(scaled.denom());
        let cutoff = u64::try_from(cutoff).map_err(|_| Error::Parameter("cutoff overflow".into()))?;
        Self::with_cutoff(x, y, w, k, cutoff)
    }

    pub fn with_cutoff(x: u64, y: u64, w: u64, k: u32, cutoff: u64) -> Result<Self> {
        if !(2 <= y && y <= x) {
            return Err(Error::Parameter(format!("need 2 <= y <= x (y={y}, x={x})")));
        }
        if w < 2 {
            return Err(Error::Parameter(format!("need w >= 2, got {w}")));
        }
        if k < 2 {
            return Err(Error::Parameter(format!("need k >= 2, got {k}")));
        }
        if cutoff >= x {
            return Err(Error::Parameter(format!("cutoff {cutoff} must be below x = {x}")));
        }
        Ok(SmoothParams { x, y, w, k, cutoff })
    }

    /// `λ = cutoff / x`.
    pub fn lambda(&self) -> ExactRational {
        ExactRational::new(self.cutoff, self.x).expect("x > 0")
    }
}

/// Is `n = m² + m - 1` for some integer `m >= 1`? Equivalent to `4n + 5`
/// being a perfect square.
pub fn is_m2_plus_m_minus_1(n: u64) -> bool {
    let t = 4 * n + 5;
    let r = integer_sqrt(t);
    r * r == t
}

/// Independent membership test straight from the defining predicates.
pub fn satisfies_predicates(n: u64, p: &SmoothParams) -> bool {
    if n <= p.cutoff || n > p.x {
        return false;
    }
    let f = crate::arith::factorize(n, None);
    f.largest_prime() <= p.y
        && f.factors().iter().all(|&(_, e)| e < p.k)
        && f.factors().iter().all(|&(q, e)| e < 2 || q <= p.w)
}

const FLAG_ODD: u8 = 1;
const FLAG_M2M1: u8 = 2;

/// Per-member data read off the factorization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub largest_prime: u64,
    pub exponent: u32,
    pub odd: bool,
    pub m2_plus_m_minus_1: bool,
}

impl Annotation {
    pub fn in_a0(&self) -> bool {
        self.odd && !self.m2_plus_m_minus_1
    }
}

/// Sieved census of one family, ascending, with O(1) membership.
#[derive(Clone, Debug)]
pub struct SmoothFamily {
    params: SmoothParams,
    members: Vec<u64>,
    largest: Vec<u32>,
    exponent: Vec<u8>,
    flags: Vec<u8>,
    bitmap: Vec<u64>,
    slices: HashMap<(u64, u32), Vec<u32>>,
}

impl SmoothFamily {
    pub fn build(params: SmoothParams) -> Result<Self> {
        Self::build_with_budget(params, None, DEFAULT_MAX_X)
    }

    /// Builds the family, reusing `table` if it covers `x`.
    pub fn build_with_budget(
        params: SmoothParams,
        table: Option<&SpfTable>,
        max_x: u64,
    ) -> Result<Self> {
        if params.x > max_x {
            return Err(Error::ResourceLimit(format!(
                "x = {} exceeds the sieve budget {max_x}",
                params.x
            )));
        }
        let owned;
        let table = match table {
            Some(t) if t.covers(params.x) => t,
            _ => {
                owned = SpfTable::new(params.x);
                &owned
            }
        };
        let lo = params.cutoff + 1;
        let hi = params.x;
        const CHUNK: u64 = 1 << 16;
        let chunks: Vec<(u64, u64)> = (lo..=hi)
            .step_by(CHUNK as usize)
            .map(|s| (s, (s + CHUNK - 1).min(hi)))
            .collect();
        let parts: Vec<Vec<(u64, u32, u8, u8)>> = chunks
            .par_iter()
            .map(|&(a, b)| {
                let mut out = Vec::new();
                for n in a..=b {
                    if let Some(entry) = classify(n, table, &params) {
                        out.push(entry);
                    }
                }
                out
            })
            .collect();
        let total: usize = parts.iter().map(Vec::len).sum();
        let mut members = Vec::with_capacity(total);
        let mut largest = Vec::with_capacity(total);
        let mut exponent = Vec::with_capacity(total);
        let mut flags = Vec::with_capacity(total);
        for part in parts {
            for (n, p, e, f) in part {
                members.push(n);
                largest.push(p);
                exponent.push(e);
                flags.push(f);
            }
        }
        Ok(Self::assemble(params, members, largest, exponent, flags))
    }

    fn assemble(
        params: SmoothParams,
        members: Vec<u64>,
        largest: Vec<u32>,
        exponent: Vec<u8>,
        flags: Vec<u8>,
    ) -> Self {
        let mut bitmap = vec![0u64; (params.x as usize >> 6) + 1];
        let mut slices: HashMap<(u64, u32), Vec<u32>> = HashMap::new();
        for (i, &n) in members.iter().enumerate() {
            bitmap[(n >> 6) as usize] |= 1 << (n & 63);
            if n > 1 {
                slices
                    .entry((largest[i] as u64, exponent[i] as u32))
                    .or_default()
                    .push(i as u32);
            }
        }
        SmoothFamily {
            params,
            members,
            largest,
            exponent,
            flags,
            bitmap,
            slices,
        }
    }

    pub fn params(&self) -> &SmoothParams {
        &self.params
    }

    pub fn members(&self) -> &[u64] {
        &self.members
    }

    /// `Ψ(x, y; w, λ)`.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, n: u64) -> bool {
        n <= self.params.x && self.bitmap[(n >> 6) as usize] & (1 << (n & 63)) != 0
    }

    fn annotation_at(&self, i: usize) -> Annotation {
        Annotation {
            largest_prime: self.largest[i] as u64,
            exponent: self.exponent[i] as u32,
            odd: self.flags[i] & FLAG_ODD != 0,
            m2_plus_m_minus_1: self.flags[i] & FLAG_M2M1 != 0,
        }
    }

    pub fn annotation(&self, n: u64) -> Option<Annotation> {
        if !self.contains(n) {
            return None;
        }
        let i = self.members.binary_search(&n).ok()?;
        Some(self.annotation_at(i))
    }

    pub fn annotations(&self) -> impl Iterator<Item = (u64, Annotation)> + '_ {
        self.members
            .iter()
            .enumerate()
            .map(move |(i, &n)| (n, self.annotation_at(i)))
    }

    /// The `A₀` subfamily, ascending.
    pub fn members_a0(&self) -> Vec<u64> {
        self.annotations()
            .filter(|(_, a)| a.in_a0())
            .map(|(n, _)| n)
            .collect()
    }

    /// `Ψ₀(x, y; w, λ)`.
    pub fn count_a0(&self) -> usize {
        self.flags.iter().filter(|&&f| f == FLAG_ODD).count()
    }

    fn check_slice_params(&self, p: u64, l: u32) -> Result<()> {
        let pr = &self.params;
        if !is_prime(p) || p > pr.y {
            return Err(Error::Parameter(format!("slice prime {p} must be a prime <= y = {}", pr.y)));
        }
        if l == 0 || l >= pr.k {
            return Err(Error::Parameter(format!("slice exponent {l} must lie in [1, k)")));
        }
        if p > pr.w && l != 1 {
            return Err(Error::Parameter(format!("prime {p} > w = {} only has l = 1", pr.w)));
        }
        Ok(())
    }

    /// Members with largest prime `p` occurring to the exact power `l`,
    /// ascending.
    pub fn slice(&self, p: u64, l: u32) -> Result<Vec<u64>> {
        self.check_slice_params(p, l)?;
        Ok(self
            .slices
            .get(&(p, l))
            .map(|ix| ix.iter().map(|&i| self.members[i as usize]).collect())
            .unwrap_or_default())
    }

    /// The slice intersected with `A₀`.
    pub fn slice_a0(&self, p: u64, l: u32) -> Result<Vec<u64>> {
        self.check_slice_params(p, l)?;
        Ok(self
            .slices
            .get(&(p, l))
            .map(|ix| {
                ix.iter()
                    .filter(|&&i| self.annotation_at(i as usize).in_a0())
                    .map(|&i| self.members[i as usize])
                    .collect()
            })
            .unwrap_or_default())
    }

    /// Members with `P(n) <= z`, i.e. the family for smoothness bound `z`.
    pub fn smooth_core(&self, z: u64) -> Vec<u64> {
        self.annotations()
            .filter(|(_, a)| a.largest_prime <= z)
            .map(|(n, _)| n)
            .collect()
    }

    /// The same family with a larger cutoff: members strictly above `cutoff`.
    pub fn restrict_above(&self, cutoff: u64) -> Result<SmoothFamily> {
        let params = SmoothParams::with_cutoff(
            self.params.x,
            self.params.y,
            self.params.w,
            self.params.k,
            cutoff.max(self.params.cutoff),
        )?;
        let start = self.members.partition_point(|&n| n <= params.cutoff);
        Ok(Self::assemble(
            params,
            self.members[start..].to_vec(),
            self.largest[start..].to_vec(),
            self.exponent[start..].to_vec(),
            self.flags[start..].to_vec(),
        ))
    }

    /// A modulus divisible by every member:
    /// `∏_{p <= min(y, w)} p^{k-1} · ∏_{w < p <= y} p`.
    pub fn modulus(&self) -> FactoredInt {
        let pr = &self.params;
        FactoredInt::from_prime_powers(
            primes_in(2, pr.y)
                .into_iter()
                .map(|p| (p, if p <= pr.w { pr.k - 1 } else { 1 })),
        )
    }
}

fn classify(n: u64, table: &SpfTable, params: &SmoothParams) -> Option<(u64, u32, u8, u8)> {
    let mut rest = n;
    let mut last = (1u64, 0u32);
    while rest > 1 {
        let p = table.spf(rest);
        if p > params.y {
            return None;
        }
        let mut e = 0u32;
        while rest % p == 0 {
            rest /= p;
            e += 1;
        }
        if e >= params.k || (e >= 2 && p > params.w) {
            return None;
        }
        last = (p, e);
    }
    let mut flags = 0;
    if n % 2 == 1 {
        flags |= FLAG_ODD;
    }
    if is_m2_plus_m_minus_1(n) {
        flags |= FLAG_M2M1;
    }
    Some((n, last.0 as u32, last.1 as u8, flags))
}

/// Exact `Σ 1/n` over `set`, accumulated over the fixed `modulus`.
pub fn reciprocal_sum(set: &[u64], modulus: &FactoredInt) -> Result<ExactRational> {
    reciprocal_sum_over(set, modulus.value())
}

pub(crate) fn reciprocal_sum_over(set: &[u64], modulus: &BigUint) -> Result<ExactRational> {
    const CHUNK: usize = 4096;
    let partials: Vec<Result<CommonDenominatorSum>> = set
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = CommonDenominatorSum::new(modulus.clone());
            acc.add_units(chunk.iter().copied())?;
            Ok(acc)
        })
        .collect();
    let mut total = CommonDenominatorSum::new(modulus.clone()).numerator().clone();
    for p in partials {
        total += p?.numerator();
    }
    ExactRational::new(total, num_bigint::BigInt::from(modulus.clone()))
}

/// Outcome of selecting the stage-two cutoff `λ'`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LambdaChoice {
    /// Integer cutoff `λ' x'`; the chosen set is every pool member above it.
    pub cutoff: u64,
    pub lambda: ExactRational,
    /// Chosen `A₀` members, ascending.
    pub chosen: Vec<u64>,
    /// `alpha - Σ_{chosen} 1/n`, strictly positive and at most `1 / cutoff`.
    pub remainder: ExactRational,
}

/// Picks the cutoff for the `A₀` members of `pool` so that
/// `0 < alpha - Σ_{n ∈ A₀, n > cutoff} 1/n <= 1/cutoff`.
///
/// Members are taken from the top down until the next one would drive the
/// remainder to zero or below; that member becomes the cutoff, which bounds
/// the remainder by the size of the jump it would have caused.
pub fn choose_lambda(pool: &SmoothFamily, alpha: &ExactRational) -> Result<LambdaChoice> {
    if !alpha.is_positive() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let candidates = pool.members_a0();
    let base = pool.modulus();
    let d = alpha.denom_unsigned();
    let modulus = base.value() / base.value().gcd(&d) * &d;
    let acc = CommonDenominatorSum::with_initial(modulus.clone(), alpha)?;
    let mut rem = acc.numerator().clone();
    let mut taken = 0usize;
    let mut cutoff = None;
    for &n in candidates.iter().rev() {
        let c = num_bigint::BigInt::from(acc.cofactor(n)?);
        if rem > c {
            rem -= c;
            taken += 1;
        } else {
            cutoff = Some(n);
            break;
        }
    }
    let remainder = ExactRational::new(rem, num_bigint::BigInt::from(modulus))?;
    let chosen = candidates[candidates.len() - taken..].to_vec();
    let cutoff = match cutoff {
        Some(c) => c,
        None => {
            // pool exhausted: the cutoff sits just below the smallest member
            let c = chosen.first().map_or(0, |&m| m - 1).max(pool.params().cutoff);
            if c == 0 || remainder > ExactRational::unit(c) {
                return Err(Error::Mass {
                    required: alpha.to_string(),
                    available: (alpha - &remainder).to_string(),
                });
            }
            c
        }
    };
    debug_assert!(remainder.is_positive() && remainder <= ExactRational::unit(cutoff));
    Ok(LambdaChoice {
        cutoff,
        lambda: ExactRational::new(cutoff, pool.params().x)?,
        chosen,
        remainder,
    })
}
