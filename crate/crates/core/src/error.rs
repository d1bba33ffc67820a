use thiserror::Error;

/// Errors raised by the construction pipeline and its building blocks.
///
/// Pipeline variants carry the failing parameter so a caller can decide what
/// to change (larger `x`, smaller `delta`, a different `k`, ...).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("{n} does not divide the working modulus")]
    Divisibility { n: String },

    #[error("residue {residue} at position {index} is zero modulo {p}")]
    ZeroResidue { index: usize, residue: u64, p: u64 },

    #[error("reciprocal mass of the pool ({available}) cannot absorb {required}")]
    Mass { required: String, available: String },

    #[error("sum of reciprocals over the full family is about {available_approx}, below r = {r}")]
    InfeasibleMass { r: String, available_approx: String },

    #[error("unsupported denominator {b}: {reason}")]
    UnsupportedDenominator { b: String, reason: String },

    #[error("could not eliminate {p}^{l} during {stage} ({available} multiples available)")]
    EliminationFailed {
        stage: String,
        p: u64,
        l: u32,
        available: usize,
    },

    #[error("remainder {remainder} left the interval (0, r) during {stage}")]
    RemainderNonPositive { stage: String, remainder: String },

    #[error("odd-expansion precondition failed for {value}: {reason}")]
    BreuschPreconditionFailed { value: String, reason: String },

    #[error("element {element} exceeds the admissible bound {bound} ({part})")]
    BoundExceeded {
        part: String,
        element: u64,
        bound: u64,
    },

    #[error("denominator {element} appears in both {first} and {second}")]
    Collision {
        element: u64,
        first: String,
        second: String,
    },

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Short machine-readable code used by the certificate tooling.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Parameter(_) => "parameter",
            Error::Divisibility { .. } => "divisibility",
            Error::ZeroResidue { .. } => "zero_residue",
            Error::Mass { .. } => "mass",
            Error::InfeasibleMass { .. } => "infeasible_mass",
            Error::UnsupportedDenominator { .. } => "unsupported_denominator",
            Error::EliminationFailed { .. } => "elimination_failed",
            Error::RemainderNonPositive { .. } => "remainder_non_positive",
            Error::BreuschPreconditionFailed { .. } => "odd_expansion_precondition",
            Error::BoundExceeded { .. } => "bound_exceeded",
            Error::Collision { .. } => "collision",
            Error::ResourceLimit(_) => "resource_limit",
            Error::Invariant(_) => "invariant",
        }
    }
}
