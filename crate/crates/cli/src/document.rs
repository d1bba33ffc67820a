//! The JSON certificate document.
//!
//! Exact rationals travel as `"a/b"` strings; floating values carry an
//! `_approx` suffix. Denominator lists are sorted and delta-encoded: the
//! first entry is absolute, the rest are gaps.

use serde::{Deserialize, Serialize};

use dense_egyptian::construct::{Parts, Representation};
use dense_egyptian::verify::Certificate;
use dense_egyptian::ExactRational;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateDocument {
    pub version: u32,
    pub r: String,
    pub x: u64,
    pub parameters: Parameters,
    pub parts: Vec<EncodedPart>,
    pub trace: TraceSummary,
    pub certificate: CertificateFields,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub epsilon: f64,
    pub delta: String,
    pub eta: f64,
    pub k: u32,
    pub lambda: String,
    pub lambda_approx: f64,
    pub y: u64,
    pub w: u64,
    pub y_prime: u64,
    pub x_prime: u64,
    pub w_prime: u64,
    pub y_doubleprime: u64,
    pub y_doubleprime_effective: u64,
    pub lambda_prime: String,
    pub lambda_prime_approx: f64,
    pub lambda_mode: String,
    pub stage_one_mode: String,
    pub stage_two_mode: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedPart {
    pub label: String,
    pub count: usize,
    pub deltas: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactValue {
    pub exact: String,
    pub approx: f64,
}

impl From<&ExactRational> for ExactValue {
    fn from(q: &ExactRational) -> Self {
        ExactValue {
            exact: q.to_string(),
            approx: q.to_f64(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    /// Primes eliminated in stage one, in processing order.
    pub stage_one_primes: Vec<u64>,
    pub stage_one_steps: usize,
    pub stage_one_removed: usize,
    pub stage_two_primes: Vec<u64>,
    pub stage_two_steps: usize,
    pub stage_two_removed: usize,
    pub initial_remainder: ExactValue,
    pub stage_one_remainder: ExactValue,
    pub residual: ExactValue,
    pub odd_expansion_terms: Vec<u64>,
    pub odd_expansion_within_reference_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateFields {
    pub passed: bool,
    pub sum_exact: bool,
    pub distinct: bool,
    pub max_ok: bool,
    pub harmonic_bound_ok: bool,
    pub size: usize,
    pub max_element: u64,
    pub density: String,
    pub density_approx: f64,
    pub c_of_r_minus_eta_approx: Option<f64>,
    pub upper_bound_approx: f64,
}

impl From<&Certificate> for CertificateFields {
    fn from(c: &Certificate) -> Self {
        CertificateFields {
            passed: c.passed(),
            sum_exact: c.sum_exact,
            distinct: c.distinct,
            max_ok: c.max_ok,
            harmonic_bound_ok: c.harmonic_bound_ok,
            size: c.size,
            max_element: c.max_element,
            density: c.density.to_string(),
            density_approx: c.comparisons.density_approx,
            c_of_r_minus_eta_approx: c.comparisons.c_of_r_minus_eta,
            upper_bound_approx: c.comparisons.upper_bound_1_minus_e_to_minus_r,
        }
    }
}

/// Sorts and delta-encodes `set`.
pub fn encode_deltas(set: &[u64]) -> Vec<u64> {
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    let mut prev = 0;
    sorted
        .into_iter()
        .map(|n| {
            let d = n - prev;
            prev = n;
            d
        })
        .collect()
}

/// Inverse of [`encode_deltas`]. Fails on overflow.
pub fn decode_deltas(deltas: &[u64]) -> Result<Vec<u64>, String> {
    let mut acc = 0u64;
    deltas
        .iter()
        .map(|&d| {
            acc = acc.checked_add(d).ok_or("delta stream overflows u64")?;
            Ok(acc)
        })
        .collect()
}

impl CertificateDocument {
    pub fn from_representation(rep: &Representation) -> Self {
        let (config, plan) = (&rep.config, &rep.plan);
        let two = &rep.stage_two;
        let primes = |t: &dense_egyptian::construct::StageTrace| {
            let mut v: Vec<u64> = t.records.iter().map(|r| r.prime).collect();
            v.dedup();
            v
        };
        CertificateDocument {
            version: FORMAT_VERSION,
            r: config.r.to_string(),
            x: config.x,
            parameters: Parameters {
                epsilon: config.epsilon,
                delta: config.delta.to_string(),
                eta: config.eta,
                k: config.k,
                lambda: plan.lambda.to_string(),
                lambda_approx: plan.lambda.to_f64(),
                y: plan.y,
                w: plan.w,
                y_prime: plan.y_prime,
                x_prime: plan.x_prime,
                w_prime: plan.w_prime,
                y_doubleprime: plan.y_doubleprime,
                y_doubleprime_effective: two.y_doubleprime_effective,
                lambda_prime: two.lambda_prime.to_string(),
                lambda_prime_approx: two.lambda_prime.to_f64(),
                lambda_mode: config.lambda_mode.to_string(),
                stage_one_mode: config.stage_one_mode.to_string(),
                stage_two_mode: config.stage_two_mode.to_string(),
            },
            parts: Parts::LABELS
                .iter()
                .zip(rep.parts.lists())
                .map(|(label, list)| EncodedPart {
                    label: label.to_string(),
                    count: list.len(),
                    deltas: encode_deltas(list),
                })
                .collect(),
            trace: TraceSummary {
                stage_one_primes: primes(&rep.stage_one.trace),
                stage_one_steps: rep.stage_one.trace.steps(),
                stage_one_removed: rep.stage_one.trace.total_removed(),
                stage_two_primes: primes(&two.trace),
                stage_two_steps: two.trace.steps(),
                stage_two_removed: two.trace.total_removed(),
                initial_remainder: (&rep.stage_one.initial_remainder).into(),
                stage_one_remainder: (&rep.stage_one.remainder).into(),
                residual: (&two.residual).into(),
                odd_expansion_terms: two.c.clone(),
                odd_expansion_within_reference_bound: two
                    .expansion
                    .as_ref()
                    .map_or(true, |e| e.within_reference_bound()),
            },
            certificate: (&rep.certificate).into(),
        }
    }

    /// The parts decoded back into sets, in label order.
    pub fn decode_parts(&self) -> Result<Parts, String> {
        let mut lists: Vec<Vec<u64>> = Vec::with_capacity(5);
        for (label, part) in Parts::LABELS.iter().zip(&self.parts) {
            if part.label != *label {
                return Err(format!("expected part {label}, found {}", part.label));
            }
            let set = decode_deltas(&part.deltas)?;
            if set.len() != part.count {
                return Err(format!("part {label} declares {} entries, holds {}", part.count, set.len()));
            }
            lists.push(set);
        }
        if self.parts.len() != 5 {
            return Err(format!("expected 5 parts, found {}", self.parts.len()));
        }
        let mut it = lists.into_iter();
        let mut next = || it.next().expect("five parts");
        Ok(Parts {
            a: next(),
            a_prime: next(),
            c_minus_a_prime: next(),
            d1: next(),
            d2: next(),
        })
    }

    /// Canonical text: pretty JSON plus a trailing newline.
    pub fn encode(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn decode(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }
}
