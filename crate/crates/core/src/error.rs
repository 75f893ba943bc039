use alloc::string::String;

/// Errors raised by the library.
///
/// Construction-time validation failures carry a short description; the
/// engine reports iteration-time problems (non-finite iterates, exhausted
/// stage caps) through the trace instead of this type.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid convex set: {0}")]
    InvalidSet(&'static str),
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("index {0} cannot be resolved by the family")]
    UnresolvableIndex(usize),
    #[error("invalid index vector: {0}")]
    InvalidIndexVector(&'static str),
    #[error("projection threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("invalid weight function: {0}")]
    InvalidWeights(String),
    #[error("iteration number must be at least 1")]
    ZeroIteration,
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
