use thiserror::Error;

/// Errors surfaced by the solver, verifier and simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation
    /// (negative time, wealth below the bankruptcy boundary, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A scenario or configuration failed validation.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The volatility matrix is numerically singular (condition number
    /// above the guard) or a matrix expected to be SPD is not.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// An iterative numerical routine could not reach its tolerance.
    #[error("accuracy failure: {0}")]
    Accuracy(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
    pub fn singular(msg: impl Into<String>) -> Self {
        Error::Singular(msg.into())
    }
    pub fn accuracy(msg: impl Into<String>) -> Self {
        Error::Accuracy(msg.into())
    }
}
