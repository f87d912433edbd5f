use thiserror::Error;

/// Errors raised by the numeric core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("noise covariance is not positive semidefinite")]
    NotPsd,

    #[error(
        "Gram matrix is not positive definite even after diagonal jitter up to {max_jitter:e} \
         (escalated x10 from {min_jitter:e})"
    )]
    NotPositiveDefinite { min_jitter: f64, max_jitter: f64 },

    #[error("predictive variance {value:e} is negative beyond round-off; factorization is broken")]
    NegativeVariance { value: f64 },

    #[error("region {index} contains no grid cells")]
    EmptyRegion { index: usize },

    #[error("every sampled candidate was infeasible (infinite cost); widen the sampling distribution")]
    NoFeasibleSamples,

    #[error("need at least two distinct displacements to fit a stiffness slope")]
    DegenerateDisplacements,

    #[error("search budget exhausted")]
    BudgetExhausted,

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
