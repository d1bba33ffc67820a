//! Dense Egyptian-fraction representations.
//!
//! Given a positive rational `r` and a bound `x`, [`construct::construct_dense`]
//! writes `r` as a sum of reciprocals of distinct integers `n <= x` that make
//! up a positive proportion of `[1, x]`, and returns the result together with
//! an independently checked [`verify::Certificate`].

pub mod arith;
pub mod breusch;
pub mod construct;
pub mod dickman;
pub mod error;
pub mod modular;
pub mod smooth;
pub mod verify;

pub use arith::{ExactRational, FactoredInt};
pub use error::{Error, Result};
