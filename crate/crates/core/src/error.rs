use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Evaluation requested outside the mathematical domain of an operation
    /// (kernel singularity, singular set of a field, non-integrable tail, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative procedure failed to converge.
    #[error("no convergence: {0}")]
    Convergence(String),

    /// An eigen iterate lost interior positivity (discretization too coarse
    /// or adversarial start).
    #[error("positivity lost: {0}")]
    PositivityLost(String),

    /// A scan found no admissible root.
    #[error("no admissible exponent in scan range: {0}")]
    NoExponent(String),

    /// Malformed persisted data.
    #[error("invalid data: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
