use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The candidate set misses `witness` (0-based): it is outside the set
    /// and has no neighbour inside it.
    #[error("set is not dominating: vertex {} has no neighbour in the set", witness + 1)]
    NotDominating { witness: usize },

    #[error("fourth moment of student-t innovations requires df > 4, got {df}")]
    UnsupportedMoment { df: f64 },

    #[error("fixed-point iteration diverged after {iterations} iterations (last iterate {last}, residual {residual:e})")]
    Diverged {
        last: Complex64,
        residual: f64,
        iterations: usize,
    },

    #[error("eigensolver failed to converge")]
    NoConvergence,

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
