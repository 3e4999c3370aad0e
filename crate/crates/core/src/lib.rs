//! Exact inference for linear arithmetic over bounded integer random variables.
//!
//! Distributions are stored as an integer offset plus a vector of log-masses
//! ([`ProbInt`]). Sums of independent variables are computed with an FFT
//! convolution carried out on max-shifted exponentials, so that very small
//! probabilities survive. The remaining linear operations (constant shift,
//! negation, scaling, floor division, modulo) are exact index remappings.

pub mod autodiff;
pub mod bench;
pub mod checks;
pub mod conv;
pub mod error;
pub mod fft;
pub mod inference;
pub mod lang;
pub mod numeric;
pub mod ops;
pub mod oracle;
pub mod pmf;
pub mod programs;

pub use error::{Error, Result};
pub use inference::{branch, expectation, prob_cmp, BranchSpec, Comparator, Condition};
pub use ops::{
    add_const, add_rv, add_rv_fft, add_rv_naive, apply_chain, div_const, mix, mod_const, mul_const, negate,
    AtomicOp, LinearOpChain,
};
pub use pmf::{MassStats, ProbInt};
