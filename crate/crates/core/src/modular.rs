//! Subset sums in `Z_p` and the elimination of a prime from a denominator.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::ToPrimitive;

use crate::arith::{exact_multiplicity, is_prime, ExactRational, FactoredInt};
use crate::error::{Error, Result};

/// Indices of a subset of the input residues and the residue they sum to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetWitness {
    /// Strictly increasing positions in the input list.
    pub indices: Vec<usize>,
    pub achieved: u64,
}

const ROOT: u32 = u32::MAX;

/// Achievable subset sums, built one residue at a time.
///
/// `back[s]` records how residue `s` was first reached: the index of the
/// element added and the residue it extended. Each insertion only extends
/// sums that existed before it, so every element is used at most once.
struct Reach {
    p: u64,
    back: Vec<Option<(u32, u64)>>,
    order: Vec<u64>,
}

impl Reach {
    fn new(p: u64) -> Self {
        let mut back = vec![None; p as usize];
        back[0] = Some((ROOT, 0));
        Reach {
            p,
            back,
            order: vec![0],
        }
    }

    /// Adds element `index` with residue `r`; returns true once `stop` is hit.
    fn insert(&mut self, index: usize, r: u64, stop: Option<u64>) -> bool {
        let existing = self.order.len();
        for k in 0..existing {
            let s = self.order[k];
            let t = (s + r) % self.p;
            if self.back[t as usize].is_none() {
                self.back[t as usize] = Some((index as u32, s));
                self.order.push(t);
                if stop == Some(t) {
                    return true;
                }
            }
            if self.order.len() as u64 == self.p {
                break;
            }
        }
        false
    }

    fn witness(&self, target: u64) -> Option<SubsetWitness> {
        let mut indices = Vec::new();
        let mut s = target;
        loop {
            let (i, prev) = self.back[s as usize]?;
            if i == ROOT {
                break;
            }
            indices.push(i as usize);
            s = prev;
        }
        indices.reverse();
        Some(SubsetWitness {
            indices,
            achieved: target,
        })
    }
}

fn validate(residues: &[u64], p: u64) -> Result<()> {
    if !is_prime(p) {
        return Err(Error::Parameter(format!("modulus {p} is not prime")));
    }
    if p > u32::MAX as u64 {
        return Err(Error::ResourceLimit(format!("modulus {p} too large for the table solver")));
    }
    for (index, &residue) in residues.iter().enumerate() {
        if residue % p == 0 {
            return Err(Error::ZeroResidue { index, residue, p });
        }
    }
    Ok(())
}

/// Finds a subset of `residues` summing to `target` modulo the prime `p`.
///
/// Returns `Ok(None)` only if the target is outside the full closure of
/// achievable sums; with at least `p - 1` residues that never happens.
/// Ties go to the witness discovered first while scanning the input in order.
pub fn subset_sum_mod_p(residues: &[u64], target: u64, p: u64) -> Result<Option<SubsetWitness>> {
    validate(residues, p)?;
    let target = target % p;
    let mut reach = Reach::new(p);
    if target != 0 {
        for (i, &r) in residues.iter().enumerate() {
            if reach.insert(i, r % p, Some(target)) {
                break;
            }
        }
    }
    Ok(reach.witness(target))
}

/// Every residue reachable as a subset sum, in discovery order.
pub fn achievable_sums(residues: &[u64], p: u64) -> Result<Vec<u64>> {
    validate(residues, p)?;
    let mut reach = Reach::new(p);
    for (i, &r) in residues.iter().enumerate() {
        reach.insert(i, r % p, None);
    }
    Ok(reach.order)
}

/// Number of achievable subset sums; at least `min(p, t + 1)` for `t` inputs.
pub fn coverage_count(residues: &[u64], p: u64) -> Result<usize> {
    Ok(achievable_sums(residues, p)?.len())
}

/// Whether the elimination must have `p - 1` candidates up front.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EliminationMode {
    /// Requires at least `p - 1` candidates, so success is guaranteed.
    Strict,
    /// Tries whatever candidates are available; may fail.
    Opportunistic,
}

impl std::str::FromStr for EliminationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(EliminationMode::Strict),
            "opportunistic" => Ok(EliminationMode::Opportunistic),
            other => Err(Error::Parameter(format!("unknown elimination mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for EliminationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EliminationMode::Strict => "strict",
            EliminationMode::Opportunistic => "opportunistic",
        })
    }
}

/// Result of removing one factor of `p` from a denominator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Elimination {
    /// The added denominators, ascending.
    pub subset: Vec<u64>,
    /// `c/d + Σ_{subset} 1/n`, reduced.
    pub value: ExactRational,
    /// `lcm{d, S}`, the common denominator the step worked over.
    pub lcm: FactoredInt,
}

/// Factors `n` over the primes of `modulus`; `None` if `n` does not divide it.
fn factor_over(n: u64, modulus: &FactoredInt) -> Option<FactoredInt> {
    let mut rest = n;
    let mut out = Vec::new();
    for &(q, e_max) in modulus.factors() {
        if rest == 1 {
            break;
        }
        let mut e = 0;
        while rest % q == 0 {
            rest /= q;
            e += 1;
        }
        if e > e_max {
            return None;
        }
        if e > 0 {
            out.push((q, e));
        }
    }
    (rest == 1).then(|| FactoredInt::from_prime_powers(out))
}

fn mod_small(a: &BigInt, p: u64) -> u64 {
    a.mod_floor(&BigInt::from(p)).to_u64().expect("residue fits")
}

/// Adds reciprocals of fewer than `p` members of `candidates` to `c/d` so
/// that the reduced denominator divides `N / p`.
///
/// Preconditions: `p^l` exactly divides `N`, `d | N`, and every candidate
/// divides `N` and is exactly divisible by `p^l`. In strict mode at least
/// `p - 1` candidates are required.
///
/// Candidates are scanned largest first, which keeps the added reciprocal
/// mass small.
pub fn eliminate_prime(
    c_over_d: &ExactRational,
    n_modulus: &FactoredInt,
    candidates: &[u64],
    p: u64,
    l: u32,
    mode: EliminationMode,
) -> Result<Elimination> {
    if !is_prime(p) || l == 0 {
        return Err(Error::Parameter(format!("need a prime power, got {p}^{l}")));
    }
    if n_modulus.exponent_of(p) != l {
        return Err(Error::Parameter(format!(
            "{p}^{l} does not exactly divide the modulus {n_modulus}"
        )));
    }
    let d = c_over_d.denom_unsigned();
    let d_factored = n_modulus
        .factor_divisor(&d)
        .ok_or_else(|| Error::Parameter(format!("denominator {d} does not divide {n_modulus}")))?;
    if mode == EliminationMode::Strict && (candidates.len() as u64) < p - 1 {
        return Err(Error::Parameter(format!(
            "strict elimination of {p} needs {} candidates, got {}",
            p - 1,
            candidates.len()
        )));
    }
    let mut ordered = candidates.to_vec();
    ordered.sort_unstable_by(|a, b| b.cmp(a));
    let candidates = &ordered[..];
    let mut lcm = d_factored;
    let mut seen = std::collections::HashSet::with_capacity(candidates.len());
    for &n in candidates {
        if !seen.insert(n) {
            return Err(Error::Parameter(format!("candidate {n} repeated")));
        }
        if n == 0 || exact_multiplicity(n, p) != l {
            return Err(Error::Parameter(format!("{p}^{l} does not exactly divide {n}")));
        }
        let f = factor_over(n, n_modulus)
            .ok_or_else(|| Error::Parameter(format!("{n} does not divide {n_modulus}")))?;
        lcm = lcm.lcm(&f);
    }

    let big_m = lcm.value();
    let pb = BigUint::from(p);
    let m = big_m / &d;
    let cm = mod_small(&(c_over_d.numer() * BigInt::from(m.clone())), p);
    let target = (p - cm) % p;
    let cofactors: Vec<BigUint> = candidates.iter().map(|&n| big_m / BigUint::from(n)).collect();
    let residues: Vec<u64> = cofactors
        .iter()
        .map(|c| (c % &pb).to_u64().expect("residue fits"))
        .collect();

    let witness = match subset_sum_mod_p(&residues, target, p)? {
        Some(w) => w,
        None if mode == EliminationMode::Strict => {
            return Err(Error::Invariant(format!(
                "{} residues failed to cover Z_{p}",
                residues.len()
            )))
        }
        None => {
            return Err(Error::EliminationFailed {
                stage: "eliminate_prime".into(),
                p,
                l,
                available: candidates.len(),
            })
        }
    };

    let mut numer = c_over_d.numer() * BigInt::from(m);
    for &i in &witness.indices {
        numer += BigInt::from(cofactors[i].clone());
    }
    let value = ExactRational::new(numer, BigInt::from(big_m.clone()))?;
    let reduced_modulus = n_modulus.div_prime_power(p, 1).expect("p divides N");
    if !reduced_modulus.divisible_by(&value.denom_unsigned()) {
        return Err(Error::Invariant(format!(
            "denominator {} does not divide N/{p}",
            value.denom()
        )));
    }
    let mut subset: Vec<u64> = witness.indices.iter().map(|&i| candidates[i]).collect();
    subset.sort_unstable();
    Ok(Elimination { subset, value, lcm })
}

/// Exhaustive `2^t` enumeration of subset sums; kept as a test oracle.
pub fn exhaustive_sums(residues: &[u64], p: u64) -> Vec<bool> {
    let mut seen = vec![false; p as usize];
    for mask in 0u64..(1 << residues.len()) {
        let s = residues
            .iter()
            .enumerate()
            .filter(|&(i, _)| mask >> i & 1 == 1)
            .fold(0, |acc, (_, &r)| (acc + r) % p);
        seen[s as usize] = true;
    }
    seen
}
