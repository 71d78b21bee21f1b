use thiserror::Error;

/// Errors produced by the moment, closure, stability and solver routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The Hankel factorization broke down: pivot `pivot` (0-based, i.e. the
    /// value of `<Q_k^2>` for `k = pivot`) was not above `threshold`.
    #[error(
        "moment vector is not strictly realizable: pivot {pivot} = {value:e} <= {threshold:e}"
    )]
    NotRealizable {
        pivot: usize,
        value: f64,
        threshold: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("closure polynomial is inconsistent: <dG/dM_{index}> residual {residual:e} exceeds {tolerance:e}")]
    InconsistentClosure {
        index: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("realizability lost in cell {cell} at t = {time}: {reason}")]
    RealizabilityLoss {
        cell: usize,
        time: f64,
        reason: String,
    },

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
