//! Reverse-mode differentiation of scalar queries over engine operations.
//!
//! A [`Tape`] records every operation together with its forward value.
//! [`Tape::grad`] walks the tape backwards applying one vector-Jacobian
//! product per node. Cotangents live in the linear mass domain and are
//! mapped onto leaf parameters at the end (`dπ/dλ = π` for raw log-masses,
//! the softmax Jacobian for logits).

mod check;
mod learn;
mod tape;

pub use check::{fd_check, FdOptions, FdReport};
pub use learn::{learn_sum, sum_numbers_direct, LearnConfig, LearnOutcome};
pub use tape::{Gradients, LeafGrad, LeafParam, Parametrization, Tape, Value, Var};
