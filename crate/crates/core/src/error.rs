use thiserror::Error;

/// Errors raised by the inference engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("mass vector is empty")]
    EmptyVector,
    #[error("negative mass {value} at index {index}")]
    NegativeMass { index: usize, value: f64 },
    #[error("invalid log-mass {value} at index {index} (NaN or +inf)")]
    InvalidLogMass { index: usize, value: f64 },
    #[error("mass vector has no positive entry")]
    AllZeroMass,
    #[error("invalid range: lo {lo} > hi {hi}")]
    InvalidRange { lo: i64, hi: i64 },
    #[error("transform length {0} is not a power of two")]
    NonPowerOfTwoLength(usize),
    #[error("inverse transform produced negative mass {value:e} below threshold {threshold:e}")]
    NumericalBlowup { value: f64, threshold: f64 },
    #[error("integer overflow in {0}")]
    IntegerOverflow(&'static str),
    #[error("vector length {requested} exceeds the configured maximum {max}")]
    DimensionOverflow { requested: u128, max: usize },
    #[error("divisor must be positive, got {0}")]
    InvalidDivisor(i64),
    #[error("distribution is not normalized: total mass {total}")]
    NotNormalized { total: f64 },
    #[error("node {0} was not recorded on this tape")]
    UnrecordedNode(usize),
    #[error("node {0} is not a scalar query")]
    NonScalarQuery(usize),
    #[error("node {0} is not a distribution")]
    NotADistribution(usize),
    #[error("label {label} is outside the reachable range [{lo}, {hi}]")]
    UnreachableLabel { label: i64, lo: i64, hi: i64 },
    #[error("leaf count mismatch: tape has {expected}, got {got}")]
    LeafCountMismatch { expected: usize, got: usize },
    #[error("joint state space of {states} assignments exceeds the cap {cap}")]
    StateSpaceTooLarge { states: u128, cap: u128 },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("could not write CSV: {0}")]
    CsvWrite(String),
}

pub type Result<T> = std::result::Result<T, Error>;
