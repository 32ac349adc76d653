use thiserror::Error;

/// Errors produced by the selection library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("column index {index} out of range for p={p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("subset indices must be strictly increasing (offending index {index})")]
    NotStrictlyIncreasing { index: usize },

    #[error("column {index} is already in the model")]
    AlreadyInModel { index: usize },

    #[error("column {index} is not in the model")]
    NotInModel { index: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: String },

    #[error("dimension mismatch: {what}")]
    DimensionMismatch { what: String },

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate response: regularized residual is not positive (is y identically zero?)")]
    DegenerateResponse,

    #[error("screened set is empty")]
    EmptyScreenedSet,

    #[error("p={p} exceeds the enumeration cap of {cap}")]
    EnumerationTooLarge { p: usize, cap: usize },

    #[error("covariance for {case} is not positive definite")]
    CovarianceNotPositiveDefinite { case: String },

    #[error("too many failed replications in cell {cell}: {failed} of {total}")]
    TooManyFailures {
        cell: usize,
        failed: usize,
        total: usize,
    },

    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
