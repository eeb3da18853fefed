//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by construction, estimation, and test routines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A dimension argument was zero or otherwise unusable.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// Two matrices or samples that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch {
        /// Dimension required by the first operand.
        expected: usize,
        /// Dimension actually supplied.
        actual: usize,
    },

    /// A scalar or structural parameter is outside its legal range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A matrix required to be symmetric is not, beyond tolerance.
    #[error("matrix is not symmetric: relative asymmetry {asymmetry:.3e} exceeds {tolerance:.1e}")]
    NotSymmetric {
        /// Frobenius norm of (A - A') relative to the norm of A.
        asymmetry: f64,
        /// Tolerance the input was checked against.
        tolerance: f64,
    },

    /// Cholesky-type factorization failed, so the matrix is not positive definite.
    #[error("matrix is not positive definite (factorization failed at pivot {pivot})")]
    NotPositiveDefinite {
        /// Index of the first nonpositive pivot.
        pivot: usize,
    },

    /// Too few observations (or too small a block count) for the requested operation.
    #[error("insufficient data: need at least {required} {what}, got {actual}")]
    InsufficientData {
        /// Minimum count the operation requires.
        required: usize,
        /// Count actually supplied.
        actual: usize,
        /// What is being counted (rows, samples, blocks).
        what: &'static str,
    },

    /// A trace-word label does not name any supplied matrix.
    #[error("unknown matrix label '{0}'")]
    UnknownLabel(String),

    /// An index argument fell outside the valid range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// The requested moment order or argument arity is not covered by the closed forms.
    #[error("unsupported order or arity: {0}")]
    Unsupported(String),

    /// A probability or other real argument left its open domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The plug-in variance of the test statistic is not strictly positive.
    #[error("degenerate variance estimate {0:.6e}; the data do not support the test")]
    DegenerateVariance(f64),

    /// Reading or writing an external CSV/JSON artifact failed.
    #[error("i/o error: {0}")]
    Io(String),

    /// An external CSV/JSON artifact did not parse.
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
