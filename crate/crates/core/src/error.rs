use thiserror::Error;

/// Errors raised by the spectral kernels, the solver and the verification checkers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShmfError {
    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// Parameters violate a modelling hypothesis (trace class, lemma window, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// Mismatched shapes or bases between operands.
    #[error("usage error: {0}")]
    Usage(String),

    /// A self-test on a constructed table failed its tolerance.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    /// The fixed-point iteration did not contract within the sweep budget.
    #[error("contraction failure after {sweeps} sweeps (last ratio {last_ratio:.3e})")]
    ContractionFailure { sweeps: usize, last_ratio: f64 },

    /// Root bracketing or a similar invariant broke; never expected in practice.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("cache error: {0}")]
    Cache(String),
}

pub type Result<T> = std::result::Result<T, ShmfError>;

pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> ShmfError {
    ShmfError::Domain {
        op,
        detail: detail.into(),
    }
}
