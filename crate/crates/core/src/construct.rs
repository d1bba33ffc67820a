//! The two-stage construction of a dense representation.
//!
//! Stage one takes every member of a smooth family `A(x, y; w, λ)` and then
//! strips the primes of the leftover remainder from the top down, each time
//! giving back a handful of members. Stage two writes the (small, odd)
//! remainder with integers at most `λx`: a greedy block of a second smooth
//! family, a few more eliminations, an odd expansion of what is left, and
//! the splitting identity to separate any overlap.

use std::collections::HashSet;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};

use crate::arith::{
    exact_multiplicity, is_k_free, largest_prime_factor, next_prime, primes_in, CommonDenominatorSum,
    ExactRational, FactoredInt,
};
use crate::breusch::{expand_odd, expand_odd_within, split, OddExpansion};
use crate::dickman::{rho, zeta};
use crate::error::{Error, Result};
use crate::modular::{eliminate_prime, Elimination, EliminationMode};
use crate::smooth::{
    choose_lambda, is_m2_plus_m_minus_1, reciprocal_sum, SmoothFamily, SmoothParams, DEFAULT_MAX_X,
};
use crate::verify::{check_with_eta, Certificate};

/// How the stage-one cutoff `λ` is picked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LambdaMode {
    /// `λ = exp(-(r - δ) ζ(k) / ρ(2 / (1 - ε)))`.
    Formula,
    /// The largest cutoff leaving a remainder in `(0, δ]`.
    Adaptive,
}

impl std::str::FromStr for LambdaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formula" => Ok(LambdaMode::Formula),
            "adaptive" => Ok(LambdaMode::Adaptive),
            other => Err(Error::Parameter(format!("unknown lambda mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for LambdaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LambdaMode::Formula => "formula",
            LambdaMode::Adaptive => "adaptive",
        })
    }
}

/// User-facing knobs; anything left `None` is derived.
#[derive(Clone, Debug)]
pub struct ConstructionOptions {
    pub k: Option<u32>,
    /// Largest `k` tried when `k` is derived.
    pub max_k: u32,
    pub epsilon: f64,
    pub delta: Option<ExactRational>,
    pub lambda_mode: LambdaMode,
    pub stage_one_mode: EliminationMode,
    pub stage_two_mode: EliminationMode,
    pub y_prime: Option<u64>,
    pub x_prime: Option<u64>,
    pub y_doubleprime: Option<u64>,
    /// Sieve budget.
    pub max_x: u64,
}

impl Default for ConstructionOptions {
    fn default() -> Self {
        ConstructionOptions {
            k: None,
            max_k: 8,
            epsilon: 0.1,
            delta: None,
            lambda_mode: LambdaMode::Adaptive,
            stage_one_mode: EliminationMode::Strict,
            stage_two_mode: EliminationMode::Opportunistic,
            y_prime: None,
            x_prime: None,
            y_doubleprime: None,
            max_x: DEFAULT_MAX_X,
        }
    }
}

/// Resolved inputs of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstructionConfig {
    pub r: ExactRational,
    pub x: u64,
    pub eta: f64,
    pub k: u32,
    pub epsilon: f64,
    pub delta: ExactRational,
    pub lambda_mode: LambdaMode,
    pub stage_one_mode: EliminationMode,
    pub stage_two_mode: EliminationMode,
}

impl ConstructionConfig {
    /// A config with the default modes, for driving the stages by hand.
    pub fn new(r: ExactRational, x: u64, k: u32) -> Self {
        let delta = default_delta(&r);
        ConstructionConfig {
            r,
            x,
            eta: 0.05,
            k,
            epsilon: 0.1,
            delta,
            lambda_mode: LambdaMode::Adaptive,
            stage_one_mode: EliminationMode::Strict,
            stage_two_mode: EliminationMode::Opportunistic,
        }
    }
}

fn default_delta(r: &ExactRational) -> ExactRational {
    let quarter = r * &ExactRational::new(1, 4).expect("nonzero");
    let cap = ExactRational::new(1, 50).expect("nonzero");
    quarter.min(cap)
}

/// Derived parameters of both stages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StagePlan {
    pub x: u64,
    pub y: u64,
    pub w: u64,
    pub k: u32,
    /// `⌊λx⌋`; stage-one members lie above it, stage-two output at or below.
    pub cutoff: u64,
    pub lambda: ExactRational,
    pub y_prime: u64,
    pub x_prime: u64,
    pub w_prime: u64,
    pub y_doubleprime: u64,
    /// Primes in `(w, y]`, descending.
    pub p_primes: Vec<u64>,
    /// Primes in `[y', min(w, y)]`, descending.
    pub q_primes: Vec<u64>,
    /// Primes in `[y'', y')`, descending.
    pub q2_primes: Vec<u64>,
}

impl StagePlan {
    /// Fills in the prime lists and checks `y'' <= y'`, `y' >= 3`, `w <= y`
    /// and `x' <= λx`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        x: u64,
        y: u64,
        w: u64,
        k: u32,
        cutoff: u64,
        y_prime: u64,
        x_prime: u64,
        y_doubleprime: u64,
    ) -> Result<Self> {
        if !(2 <= y && y <= x && 2 <= w && k >= 2 && cutoff < x) {
            return Err(Error::Parameter(format!(
                "inconsistent plan: x={x}, y={y}, w={w}, k={k}, cutoff={cutoff}"
            )));
        }
        if y_prime < 3 || y_doubleprime > y_prime || y_doubleprime < 3 {
            return Err(Error::Parameter(format!(
                "need 3 <= y'' <= y' (y'={y_prime}, y''={y_doubleprime})"
            )));
        }
        if cutoff > 0 && x_prime > cutoff {
            return Err(Error::Parameter(format!("x' = {x_prime} exceeds the cutoff {cutoff}")));
        }
        let desc = |mut v: Vec<u64>| {
            v.reverse();
            v
        };
        Ok(StagePlan {
            x,
            y,
            w,
            k,
            cutoff,
            lambda: ExactRational::new(cutoff, x)?,
            y_prime,
            x_prime,
            w_prime: y_prime,
            y_doubleprime,
            p_primes: desc(if w < y { primes_in(w + 1, y) } else { Vec::new() }),
            q_primes: desc(primes_in(y_prime, w.min(y))),
            q2_primes: desc(primes_in(y_doubleprime, y_prime - 1)),
        })
    }

    /// `p₀`, the least prime above `y`.
    pub fn p0(&self) -> u64 {
        next_prime(self.y + 1)
    }
}

/// `D(z) = ∏_{p<z, p<=w} p^{k-1} · ∏_{w<p<z} p`.
pub fn modulus_product(z: u64, w: u64, k: u32) -> FactoredInt {
    if z <= 2 {
        return FactoredInt::one();
    }
    FactoredInt::from_prime_powers(
        primes_in(2, z - 1)
            .into_iter()
            .map(|p| (p, if p <= w { k - 1 } else { 1 })),
    )
}

/// `D₀(z)`, the odd part of `D(z)`.
pub fn odd_modulus_product(z: u64, w: u64, k: u32) -> FactoredInt {
    modulus_product(z, w, k).odd_part()
}

fn floor_power(x: u64, e: f64) -> u64 {
    let v = (x as f64).powf(e);
    // absorb rounding at exact powers
    (v + 1e-9 * v.max(1.0)).floor() as u64
}

fn pick_k(b: &BigUint, opts: &ConstructionOptions) -> Result<u32> {
    let unsupported = |reason: String| Error::UnsupportedDenominator {
        b: b.to_string(),
        reason,
    };
    let bv = b
        .to_u64()
        .ok_or_else(|| unsupported("denominator exceeds 64 bits".into()))?;
    match opts.k {
        Some(k) if k < 2 => Err(Error::Parameter(format!("k must be >= 2, got {k}"))),
        Some(k) if !is_k_free(bv, k) => Err(unsupported(format!("not {k}-free"))),
        Some(k) => Ok(k),
        None => (3..=opts.max_k.max(3))
            .find(|&k| is_k_free(bv, k))
            .ok_or_else(|| unsupported(format!("not k-free for any k <= {}", opts.max_k.max(3)))),
    }
}

/// Everything the stages need: config, plan and the stage-one family.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: ConstructionConfig,
    pub plan: StagePlan,
    /// `A(x, y; w, λ)`.
    pub family: SmoothFamily,
}

/// Resolves every parameter of a run.
pub fn plan_parameters(
    r: &ExactRational,
    eta: f64,
    x: u64,
    opts: &ConstructionOptions,
) -> Result<(ConstructionConfig, StagePlan)> {
    prepare(r, eta, x, opts).map(|p| (p.config, p.plan))
}

/// [`plan_parameters`], also returning the stage-one family.
pub fn prepare(r: &ExactRational, eta: f64, x: u64, opts: &ConstructionOptions) -> Result<Prepared> {
    if !r.is_positive() {
        return Err(Error::Domain(format!("r must be positive, got {r}")));
    }
    if x < 3 {
        return Err(Error::Domain(format!("x must be at least 3, got {x}")));
    }
    if !(opts.epsilon > 0.0 && opts.epsilon < 0.5) {
        return Err(Error::Parameter(format!("epsilon must lie in (0, 1/2), got {}", opts.epsilon)));
    }
    if !(eta > 0.0) {
        return Err(Error::Parameter(format!("eta must be positive, got {eta}")));
    }
    let delta = opts.delta.clone().unwrap_or_else(|| default_delta(r));
    if !delta.is_positive() || &delta >= r {
        return Err(Error::Parameter(format!("delta must lie in (0, r), got {delta}")));
    }
    let b = r.denom_unsigned();
    let k = pick_k(&b, opts)?;
    let y = floor_power(x, (1.0 - opts.epsilon) / 2.0);
    let w = floor_power(x, (1.0 - opts.epsilon) / k as f64);
    if y < 2 || w < 2 {
        return Err(Error::Parameter(format!("x = {x} is too small: y = {y}, w = {w}")));
    }
    let bv = b.to_u64().expect("checked in pick_k");
    if largest_prime_factor(bv) > w {
        return Err(Error::UnsupportedDenominator {
            b: b.to_string(),
            reason: format!("largest prime factor exceeds w = {w}"),
        });
    }
    let config = ConstructionConfig {
        r: r.clone(),
        x,
        eta,
        k,
        epsilon: opts.epsilon,
        delta,
        lambda_mode: opts.lambda_mode,
        stage_one_mode: opts.stage_one_mode,
        stage_two_mode: opts.stage_two_mode,
    };

    let full = SmoothFamily::build_with_budget(
        SmoothParams::with_cutoff(x, y, w, k, 0)?,
        None,
        opts.max_x,
    )?;
    let cutoff = match opts.lambda_mode {
        LambdaMode::Adaptive => adaptive_cutoff(&full, r, &config.delta)?,
        LambdaMode::Formula => {
            let lam = (-(r.to_f64() - config.delta.to_f64()) * zeta(k)
                / rho(2.0 / (1.0 - opts.epsilon))?)
            .exp();
            ((lam * x as f64).floor() as u64).min(x - 1)
        }
    };
    let family = full.restrict_above(cutoff)?;

    let y_prime = match opts.y_prime {
        Some(v) => v,
        None => default_y_prime(&family, w, y, opts.stage_one_mode),
    };
    let x_prime = opts
        .x_prime
        .unwrap_or_else(|| (y_prime.saturating_pow(2 * k)).min(cutoff / 2));
    if x_prime > cutoff {
        return Err(Error::Parameter(format!(
            "x' = {x_prime} must not exceed the stage-one cutoff {cutoff}"
        )));
    }
    if x_prime < y_prime {
        return Err(Error::Parameter(format!(
            "x' = {x_prime} is below y' = {y_prime}; increase x"
        )));
    }
    let y_doubleprime = opts
        .y_doubleprime
        .unwrap_or_else(|| default_y_doubleprime(x, k))
        .min(y_prime);
    let plan = StagePlan::new(x, y, w, k, cutoff, y_prime, x_prime, y_doubleprime)?;
    Ok(Prepared {
        config,
        plan,
        family,
    })
}

/// Largest cutoff `c` (just below a member) with
/// `0 < r - Σ_{n > c} 1/n <= δ`.
fn adaptive_cutoff(family: &SmoothFamily, r: &ExactRational, delta: &ExactRational) -> Result<u64> {
    let modulus = family.modulus();
    let d = r.denom_unsigned();
    if !modulus.divisible_by(&d) {
        return Err(Error::UnsupportedDenominator {
            b: d.to_string(),
            reason: "does not divide the family modulus".into(),
        });
    }
    let acc = CommonDenominatorSum::with_initial(modulus.value().clone(), r)?;
    let m = num_bigint::BigInt::from(modulus.value().clone());
    // rem/M <= dn/dd  <=>  rem·dd <= dn·M
    let dn = delta.numer().clone();
    let dd = delta.denom().clone();
    let threshold = &dn * &m;
    let mut rem = acc.numerator().clone();
    for &n in family.members().iter().rev() {
        rem -= num_bigint::BigInt::from(acc.cofactor(n)?);
        if &rem * &dd <= threshold {
            if rem <= num_bigint::BigInt::ZERO {
                return Err(Error::RemainderNonPositive {
                    stage: "lambda selection".into(),
                    remainder: ExactRational::new(rem, m)?.to_string(),
                });
            }
            return Ok(n - 1);
        }
    }
    let left = ExactRational::new(rem, m)?;
    Err(Error::InfeasibleMass {
        r: r.to_string(),
        available_approx: format!("{:.6}", (r - &left).to_f64()),
    })
}

fn slice_is_full(family: &SmoothFamily, q: u64, k: u32) -> bool {
    (1..k).all(|l| family.slice(q, l).map_or(false, |s| s.len() as u64 + 1 >= q))
}

/// Smallest bound `y' >= 7` such that every prime in `[y', min(w, 30)]`
/// has full slices for all exponents, so strict elimination cannot stall.
/// Falls back to `min(w, 30) + 1` when the top prime already falls short.
/// In opportunistic mode non-empty slices suffice. Either way `y'` is raised
/// far enough that the powers-of-two cleanup has members to draw on.
fn default_y_prime(family: &SmoothFamily, w: u64, y: u64, mode: EliminationMode) -> u64 {
    let top = w.min(y).min(30);
    let mut y_prime = top + 1;
    for q in primes_in(7, top).into_iter().rev() {
        if mode == EliminationMode::Strict && !slice_is_full(family, q, family.params().k) {
            break;
        }
        if mode == EliminationMode::Opportunistic
            && (1..family.params().k).any(|l| family.slice(q, l).map_or(true, |s| s.is_empty()))
        {
            break;
        }
        y_prime = q;
    }
    y_prime.max(7).max(two_power_floor(family))
}

/// Smallest prime bound leaving, for each `l < k`, some member with
/// `P(n) < y'` and `v_2(n) = l`, which the powers-of-two cleanup draws on.
fn two_power_floor(family: &SmoothFamily) -> u64 {
    let k = family.params().k;
    let mut least = vec![u64::MAX; k as usize];
    for (n, a) in family.annotations() {
        let v = n.trailing_zeros() as usize;
        if (1..k as usize).contains(&v) {
            least[v] = least[v].min(a.largest_prime);
        }
    }
    match least[1..].iter().max() {
        Some(&p) if p != u64::MAX => next_prime(p + 1),
        _ => 0,
    }
}

/// Largest bound with `∏_{3 <= p < y''} p^k <= x^{2/3}`, at least 5.
pub fn default_y_doubleprime(x: u64, k: u32) -> u64 {
    let budget = (x as f64).powf(2.0 / 3.0);
    let mut prod = 1.0f64;
    let mut bound = 3;
    let mut p = 3;
    loop {
        prod *= (p as f64).powi(k as i32);
        if prod > budget {
            break;
        }
        p = next_prime(p + 1);
        bound = p;
    }
    bound.max(5)
}

/// One elimination (or cleanup) step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StageRecord {
    pub stage: String,
    pub prime: u64,
    pub l: u32,
    /// Members handed back to the remainder, ascending.
    pub removed: Vec<u64>,
    pub remainder_after: ExactRational,
    /// The modulus `N` the step worked under.
    pub modulus: FactoredInt,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StageTrace {
    pub records: Vec<StageRecord>,
}

impl StageTrace {
    pub fn total_removed(&self) -> usize {
        self.records.iter().map(|r| r.removed.len()).sum()
    }

    pub fn steps(&self) -> usize {
        self.records.len()
    }
}

fn eliminate_step(
    stage: &str,
    remainder: &ExactRational,
    modulus: &FactoredInt,
    candidates: &[u64],
    p: u64,
    l: u32,
    mode: EliminationMode,
) -> Result<Elimination> {
    let failed = || Error::EliminationFailed {
        stage: stage.to_string(),
        p,
        l,
        available: candidates.len(),
    };
    if mode == EliminationMode::Strict && (candidates.len() as u64) + 1 < p {
        return Err(failed());
    }
    match eliminate_prime(remainder, modulus, candidates, p, l, mode) {
        Err(Error::EliminationFailed { .. }) => Err(failed()),
        other => other,
    }
}

fn telescoping_check(before: &ExactRational, after: &ExactRational, added: &[u64]) -> Result<()> {
    let step: ExactRational = added.iter().map(|&n| ExactRational::unit(n)).sum();
    if &(before + &step) != after {
        return Err(Error::Invariant(format!(
            "step does not telescope: {before} + {step} != {after}"
        )));
    }
    Ok(())
}

/// Result of stage one.
#[derive(Clone, Debug)]
pub struct StageOne {
    /// `A`: the family minus every handed-back member, ascending.
    pub kept: Vec<u64>,
    /// `B`, ascending.
    pub removed: Vec<u64>,
    /// `r - Σ_{family} 1/n`.
    pub initial_remainder: ExactRational,
    /// `r - Σ_A 1/n`, with denominator dividing `D₀(y')`.
    pub remainder: ExactRational,
    pub trace: StageTrace,
}

/// Stage one over `family = A(x, y; w, λ)`.
pub fn stage_one(config: &ConstructionConfig, plan: &StagePlan, family: &SmoothFamily) -> Result<StageOne> {
    let fp = family.params();
    if (fp.x, fp.y, fp.w, fp.k, fp.cutoff) != (plan.x, plan.y, plan.w, plan.k, plan.cutoff) {
        return Err(Error::Parameter("family does not match the plan".into()));
    }
    let r = &config.r;
    let (k, w) = (plan.k, plan.w);
    let mut modulus = modulus_product(plan.p0(), w, k);
    if !modulus.divisible_by(&r.denom_unsigned()) {
        return Err(Error::UnsupportedDenominator {
            b: r.denom().to_string(),
            reason: format!("does not divide D(p0) = {modulus}"),
        });
    }
    let initial = r - &reciprocal_sum(family.members(), &modulus)?;
    if !initial.is_positive() {
        return Err(Error::RemainderNonPositive {
            stage: "stage one".into(),
            remainder: initial.to_string(),
        });
    }
    let mut remainder = initial.clone();
    let mut removed: HashSet<u64> = HashSet::new();
    let mut trace = StageTrace::default();
    let mut record = |stage: &str,
                      prime: u64,
                      l: u32,
                      step: Elimination,
                      before: &ExactRational,
                      modulus: &FactoredInt,
                      removed: &mut HashSet<u64>|
     -> Result<ExactRational> {
        telescoping_check(before, &step.value, &step.subset)?;
        for &n in &step.subset {
            if !removed.insert(n) {
                return Err(Error::Invariant(format!("{n} handed back twice")));
            }
        }
        trace.records.push(StageRecord {
            stage: stage.to_string(),
            prime,
            l,
            removed: step.subset,
            remainder_after: step.value.clone(),
            modulus: modulus.clone(),
        });
        Ok(step.value)
    };

    for &p in &plan.p_primes {
        let slice = family.slice(p, 1)?;
        let step = eliminate_step("stage one, large primes", &remainder, &modulus, &slice, p, 1, config.stage_one_mode)?;
        remainder = record("large primes", p, 1, step, &remainder, &modulus, &mut removed)?;
        modulus = modulus.div_prime_power(p, 1).expect("p divides D(p_{i-1})");
    }
    for &q in &plan.q_primes {
        for l in (1..k).rev() {
            let slice = family.slice(q, l)?;
            let step = eliminate_step("stage one, medium primes", &remainder, &modulus, &slice, q, l, config.stage_one_mode)?;
            remainder = record("medium primes", q, l, step, &remainder, &modulus, &mut removed)?;
            modulus = modulus.div_prime_power(q, 1).expect("q divides the modulus");
        }
    }

    // powers of two: one member per level, taken from the y'-smooth core
    let core: Vec<u64> = family
        .annotations()
        .filter(|(_, a)| a.largest_prime < plan.y_prime)
        .map(|(n, _)| n)
        .collect();
    for l in (1..k).rev() {
        let v = exact_multiplicity_big(&remainder.denom_unsigned(), 2);
        if v != l {
            continue;
        }
        let pick = core
            .iter()
            .rev()
            .copied()
            .find(|&n| exact_multiplicity(n, 2) == l && !removed.contains(&n))
            .ok_or_else(|| Error::EliminationFailed {
                stage: "stage one, powers of two".into(),
                p: 2,
                l,
                available: 0,
            })?;
        let before = remainder.clone();
        let after = &before + &ExactRational::unit(pick);
        let step = Elimination {
            subset: vec![pick],
            value: after,
            lcm: modulus.clone(),
        };
        remainder = record("powers of two", 2, l, step, &before, &modulus, &mut removed)?;
    }

    let target = odd_modulus_product(plan.y_prime, w, k);
    if !target.divisible_by(&remainder.denom_unsigned()) {
        return Err(Error::Invariant(format!(
            "stage-one remainder {remainder} does not divide D0(y') = {target}"
        )));
    }
    if &remainder >= r {
        return Err(Error::RemainderNonPositive {
            stage: "stage one".into(),
            remainder: remainder.to_string(),
        });
    }
    let kept: Vec<u64> = family.members().iter().copied().filter(|n| !removed.contains(n)).collect();
    let mut removed: Vec<u64> = removed.into_iter().collect();
    removed.sort_unstable();
    // r = remainder + Σ_A 1/n, checked over the stage modulus
    let kept_sum = reciprocal_sum(&kept, &modulus_product(plan.p0(), w, k))?;
    if &(&remainder + &kept_sum) != r {
        return Err(Error::Invariant("stage-one telescoping identity fails".into()));
    }
    Ok(StageOne {
        kept,
        removed,
        initial_remainder: initial,
        remainder,
        trace,
    })
}

fn exact_multiplicity_big(n: &BigUint, p: u64) -> u32 {
    let pb = BigUint::from(p);
    let mut n = n.clone();
    let mut e = 0;
    while !n.is_one() && (&n % &pb) == BigUint::ZERO {
        n /= &pb;
        e += 1;
    }
    e
}

/// The four pieces that replace `A' ∪ C` once overlaps are split apart.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FourSets {
    pub a_prime: Vec<u64>,
    pub c_minus_a_prime: Vec<u64>,
    pub d1: Vec<u64>,
    pub d2: Vec<u64>,
}

impl FourSets {
    pub fn all(&self) -> impl Iterator<Item = u64> + '_ {
        self.a_prime
            .iter()
            .chain(&self.c_minus_a_prime)
            .chain(&self.d1)
            .chain(&self.d2)
            .copied()
    }

    pub fn max(&self) -> u64 {
        self.all().max().unwrap_or(0)
    }
}

/// Splits every `n ∈ A' ∩ C` into `n + 1` and `n(n + 1)`.
///
/// Both inputs must be odd; `A'` must avoid the integers `m² + m - 1`,
/// which is what keeps the two new sets apart. Both are re-checked.
pub fn repair_overlap(a_prime: &[u64], c: &[u64]) -> Result<FourSets> {
    if let Some(&n) = a_prime.iter().chain(c).find(|&&n| n % 2 == 0) {
        return Err(Error::Parameter(format!("{n} is even")));
    }
    if let Some(&n) = a_prime.iter().find(|&&n| is_m2_plus_m_minus_1(n)) {
        return Err(Error::Parameter(format!("{n} has the form m² + m - 1")));
    }
    let in_a: HashSet<u64> = a_prime.iter().copied().collect();
    let mut out = FourSets {
        a_prime: sorted(a_prime.to_vec()),
        ..FourSets::default()
    };
    for &n in c {
        if in_a.contains(&n) {
            let (d1, d2) = split(n);
            let _ = n.checked_mul(n + 1).ok_or_else(|| Error::ResourceLimit(format!("{n}(n+1) overflows")))?;
            out.d1.push(d1);
            out.d2.push(d2);
        } else {
            out.c_minus_a_prime.push(n);
        }
    }
    out.c_minus_a_prime.sort_unstable();
    out.d1.sort_unstable();
    out.d2.sort_unstable();
    if let Some(n) = first_common(&out.d1, &out.d2) {
        return Err(Error::Collision {
            element: n,
            first: "D1".into(),
            second: "D2".into(),
        });
    }
    Ok(out)
}

fn sorted(mut v: Vec<u64>) -> Vec<u64> {
    v.sort_unstable();
    v
}

/// First common element of two ascending lists.
fn first_common(a: &[u64], b: &[u64]) -> Option<u64> {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => return Some(a[i]),
        }
    }
    None
}

/// Result of stage two.
#[derive(Clone, Debug)]
pub struct StageTwo {
    pub sets: FourSets,
    /// The odd expansion `C` before splitting.
    pub c: Vec<u64>,
    pub lambda_prime: ExactRational,
    /// `⌊λ'x'⌋`.
    pub cutoff_prime: u64,
    /// Bound below which primes were left for the odd expansion; above the
    /// planned `y''` when an opportunistic elimination gave up early.
    pub y_doubleprime_effective: u64,
    /// Value handed to the odd expansion.
    pub residual: ExactRational,
    pub expansion: Option<OddExpansion>,
    pub trace: StageTrace,
}

/// Stage two: writes `remainder` with distinct integers at most `λx`.
pub fn stage_two(remainder: &ExactRational, config: &ConstructionConfig, plan: &StagePlan) -> Result<StageTwo> {
    let (k, w) = (plan.k, plan.w);
    if !remainder.is_positive() {
        return Err(Error::RemainderNonPositive {
            stage: "stage two".into(),
            remainder: remainder.to_string(),
        });
    }
    let start = odd_modulus_product(plan.y_prime, w, k);
    let d = remainder.denom_unsigned();
    if !start.divisible_by(&d) {
        return Err(Error::Parameter(format!("remainder denominator {d} does not divide D0(y') = {start}")));
    }
    if d.is_one() {
        return Err(Error::Parameter(format!(
            "remainder {remainder} has denominator 1; raise y' so that D0(y') > 1"
        )));
    }
    let bound = plan.cutoff;
    if plan.x_prime > bound {
        return Err(Error::BoundExceeded {
            part: "x'".into(),
            element: plan.x_prime,
            bound,
        });
    }
    let pool_y = (plan.y_prime - 1).max(2);
    let pool = SmoothFamily::build(SmoothParams::with_cutoff(plan.x_prime, pool_y, pool_y, k, 0)?)?;
    let choice = choose_lambda(&pool, remainder)?;
    let chosen: HashSet<u64> = choice.chosen.iter().copied().collect();

    let mut residual = choice.remainder.clone();
    let mut removed: HashSet<u64> = HashSet::new();
    let mut trace = StageTrace::default();
    let mut y_eff = plan.y_doubleprime;
    'primes: for &q in &plan.q2_primes {
        for l in (1..k).rev() {
            let modulus = modulus_product(q, w, k).mul(&FactoredInt::from_prime_powers([(q, l)]));
            let slice: Vec<u64> = pool
                .slice_a0(q, l)?
                .into_iter()
                .filter(|n| chosen.contains(n))
                .collect();
            let step = match eliminate_step("stage two", &residual, &modulus, &slice, q, l, config.stage_two_mode) {
                Ok(s) => s,
                Err(Error::EliminationFailed { .. }) if config.stage_two_mode == EliminationMode::Opportunistic => {
                    // leave q and everything below it to the odd expansion
                    y_eff = q + 1;
                    break 'primes;
                }
                Err(e) => return Err(e),
            };
            telescoping_check(&residual, &step.value, &step.subset)?;
            removed.extend(step.subset.iter().copied());
            residual = step.value.clone();
            trace.records.push(StageRecord {
                stage: "small primes".into(),
                prime: q,
                l,
                removed: step.subset,
                remainder_after: step.value,
                modulus,
            });
        }
    }
    let a_prime: Vec<u64> = choice.chosen.iter().copied().filter(|n| !removed.contains(n)).collect();

    let target = odd_modulus_product(y_eff, w, k);
    if !target.divisible_by(&residual.denom_unsigned()) {
        return Err(Error::Invariant(format!(
            "stage-two residual {residual} does not divide D0({y_eff}) = {target}"
        )));
    }
    let (expansion, sets) = if residual.is_zero() {
        (None, repair_overlap(&a_prime, &[])?)
    } else {
        let p = residual
            .denom()
            .to_u64()
            .map(largest_prime_factor)
            .ok_or_else(|| Error::BreuschPreconditionFailed {
                value: residual.to_string(),
                reason: "denominator exceeds 64 bits".into(),
            })?;
        if residual >= ExactRational::unit(p) {
            return Err(Error::BreuschPreconditionFailed {
                value: residual.to_string(),
                reason: format!("not below 1/P(d) = 1/{p}; increase x or decrease delta"),
            });
        }
        // Terms below x^{2/3} when the residual allows it, else up to λx.
        let tight = bound.min(floor_power(plan.x, 2.0 / 3.0).saturating_sub(1));
        let (e, s) = match expand_and_repair(&residual, &a_prime, tight) {
            Ok(found) => found,
            Err(_) if tight < bound => expand_and_repair(&residual, &a_prime, bound)?,
            Err(err) => return Err(err),
        };
        (Some(e), s)
    };

    let total: ExactRational = sets.all().map(ExactRational::unit).sum();
    if &total != remainder {
        return Err(Error::Invariant(format!("stage two sums to {total}, expected {remainder}")));
    }
    Ok(StageTwo {
        c: expansion.as_ref().map(|e| e.terms.clone()).unwrap_or_default(),
        sets,
        lambda_prime: choice.lambda,
        cutoff_prime: choice.cutoff,
        y_doubleprime_effective: y_eff,
        residual,
        expansion,
        trace,
    })
}

/// Odd expansion with every term at most `bound`; if splitting an overlap
/// with `A'` would overshoot, retries with `A'` excluded from the terms.
fn expand_and_repair(residual: &ExactRational, a_prime: &[u64], bound: u64) -> Result<(OddExpansion, FourSets)> {
    let none = HashSet::new();
    let first = match expand_odd_within(residual, bound, &none) {
        Ok(e) => e,
        Err(Error::BreuschPreconditionFailed { .. }) => {
            let free = expand_odd(residual)?;
            return Err(Error::BoundExceeded {
                part: "C".into(),
                element: free.max_term(),
                bound,
            });
        }
        Err(e) => return Err(e),
    };
    let sets = repair_overlap(a_prime, &first.terms)?;
    if sets.max() <= bound {
        return Ok((first, sets));
    }
    let over = sets.max();
    let banned: HashSet<u64> = a_prime.iter().copied().collect();
    match expand_odd_within(residual, bound, &banned) {
        Ok(e) => {
            let sets = repair_overlap(a_prime, &e.terms)?;
            Ok((e, sets))
        }
        Err(_) => Err(Error::BoundExceeded {
            part: "D2".into(),
            element: over,
            bound,
        }),
    }
}

/// The five disjoint parts of a representation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Parts {
    pub a: Vec<u64>,
    pub a_prime: Vec<u64>,
    pub c_minus_a_prime: Vec<u64>,
    pub d1: Vec<u64>,
    pub d2: Vec<u64>,
}

impl Parts {
    pub const LABELS: [&'static str; 5] = ["A", "A'", "C\\A'", "D1", "D2"];

    pub fn lists(&self) -> [&[u64]; 5] {
        [&self.a, &self.a_prime, &self.c_minus_a_prime, &self.d1, &self.d2]
    }

    /// All elements, ascending; errors if two parts share an element.
    pub fn union(&self) -> Result<Vec<u64>> {
        let mut tagged: Vec<(u64, usize)> = self
            .lists()
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.iter().map(move |&n| (n, i)))
            .collect();
        tagged.sort_unstable();
        for w in tagged.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Collision {
                    element: w[0].0,
                    first: Self::LABELS[w[0].1].into(),
                    second: Self::LABELS[w[1].1].into(),
                });
            }
        }
        Ok(tagged.into_iter().map(|(n, _)| n).collect())
    }
}

/// A certified representation of `r`.
#[derive(Clone, Debug)]
pub struct Representation {
    pub config: ConstructionConfig,
    pub plan: StagePlan,
    pub parts: Parts,
    /// `S`, ascending.
    pub elements: Vec<u64>,
    pub density: ExactRational,
    pub certificate: Certificate,
    pub stage_one: StageOne,
    pub stage_two: StageTwo,
}

/// Writes `r` as `Σ 1/n` over distinct `n <= x`, densely, and certifies it.
pub fn construct_dense(r: &ExactRational, x: u64, eta: f64, opts: &ConstructionOptions) -> Result<Representation> {
    let Prepared { config, plan, family } = prepare(r, eta, x, opts)?;
    let one = stage_one(&config, &plan, &family)?;
    drop(family);
    let two = stage_two(&one.remainder, &config, &plan)?;
    if let Some(&n) = two.sets.all().collect::<Vec<_>>().iter().find(|&&n| n > plan.cutoff) {
        return Err(Error::BoundExceeded {
            part: "stage two".into(),
            element: n,
            bound: plan.cutoff,
        });
    }
    let parts = Parts {
        a: one.kept.clone(),
        a_prime: two.sets.a_prime.clone(),
        c_minus_a_prime: two.sets.c_minus_a_prime.clone(),
        d1: two.sets.d1.clone(),
        d2: two.sets.d2.clone(),
    };
    let elements = parts.union()?;
    let certificate = check_with_eta(r, &elements, x, eta);
    if !certificate.passed() {
        return Err(Error::Invariant(format!("certificate failed: {certificate:?}")));
    }
    Ok(Representation {
        density: certificate.density.clone(),
        config,
        plan,
        parts,
        elements,
        certificate,
        stage_one: one,
        stage_two: two,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> ExactRational {
        s.parse().unwrap()
    }

    #[test]
    fn modulus_examples() {
        assert_eq!(modulus_product(7, 10, 3).value(), &BigUint::from(900u32));
        assert_eq!(odd_modulus_product(7, 10, 3).value(), &BigUint::from(225u32));
        assert!(modulus_product(2, 10, 3).is_one());
        // primes above w enter once
        assert_eq!(modulus_product(8, 3, 3).value(), &BigUint::from(4u32 * 9 * 5 * 7));
    }

    #[test]
    fn y_doubleprime_guard() {
        assert_eq!(default_y_doubleprime(1_000_000, 3), 7);
        assert_eq!(default_y_doubleprime(100_000, 3), 5);
        assert_eq!(default_y_doubleprime(1_000_000_000_000, 3), 11);
    }

    #[test]
    fn repair_splits_overlap() {
        let s = repair_overlap(&[15, 21], &[21, 35]).unwrap();
        assert_eq!(s.c_minus_a_prime, vec![35]);
        assert_eq!(s.d1, vec![22]);
        assert_eq!(s.d2, vec![462]);
        assert!(repair_overlap(&[4], &[]).is_err());
        assert!(repair_overlap(&[5], &[]).is_err());
    }

    #[test]
    fn toy_stage_one_is_infeasible() {
        let config = ConstructionConfig::new(q("5/6"), 30, 2);
        let plan = StagePlan::new(30, 5, 30, 2, 0, 3, 3, 3).unwrap();
        assert_eq!(plan.q_primes, vec![5, 3]);
        let family = SmoothFamily::build(SmoothParams::with_cutoff(30, 5, 30, 2, 0).unwrap()).unwrap();
        // 5/6 minus the reciprocals of {1, 2, 3, 5, 6, 10, 15, 30} is negative
        assert!(matches!(
            stage_one(&config, &plan, &family),
            Err(Error::RemainderNonPositive { .. })
        ));
    }

    #[test]
    fn toy_stage_one_feasible_variant() {
        let config = ConstructionConfig::new(q("5/2"), 30, 2);
        let plan = StagePlan::new(30, 5, 30, 2, 0, 3, 3, 3).unwrap();
        let family = SmoothFamily::build(SmoothParams::with_cutoff(30, 5, 30, 2, 0).unwrap()).unwrap();
        let one = stage_one(&config, &plan, &family).unwrap();
        assert_eq!(one.initial_remainder, q("1/10"));
        let b: Vec<u64> = one.removed.clone();
        assert_eq!(b, vec![2, 3, 15]);
        assert_eq!(one.kept, vec![1, 5, 6, 10, 30]);
        assert_eq!(one.remainder, q("1"));
        let back: ExactRational = one.kept.iter().map(|&n| ExactRational::unit(n)).sum();
        assert_eq!(&back + &one.remainder, q("5/2"));
        for rec in &one.trace.records {
            if rec.prime > 2 {
                assert_eq!(exact_multiplicity_big(&rec.remainder_after.denom_unsigned(), rec.prime), rec.l - 1);
            }
        }
    }

    #[test]
    fn planning_errors() {
        let opts = ConstructionOptions::default();
        assert!(matches!(
            plan_parameters(&q("10"), 0.05, 1000, &opts),
            Err(Error::InfeasibleMass { .. })
        ));
        let big_power = ExactRational::new(1, 1u64 << 20).unwrap();
        assert!(matches!(
            plan_parameters(&big_power, 0.05, 1000, &opts),
            Err(Error::UnsupportedDenominator { .. })
        ));
        assert!(plan_parameters(&q("0"), 0.05, 1000, &opts).is_err());
        assert!(plan_parameters(&q("1/3"), 0.05, 2, &opts).is_err());
    }

    #[test]
    fn formula_lambda() {
        let opts = ConstructionOptions {
            lambda_mode: LambdaMode::Formula,
            k: Some(3),
            delta: Some(q("1/20")),
            ..ConstructionOptions::default()
        };
        let (_, plan) = plan_parameters(&q("1"), 0.05, 1_000_000, &opts).unwrap();
        let lam = (-0.95 * zeta(3) / rho(2.0 / 0.9).unwrap()).exp();
        assert_eq!(plan.cutoff, (lam * 1e6).floor() as u64);
    }
}
