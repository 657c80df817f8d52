use thiserror::Error;

/// Crate-wide error type. The CLI maps variants onto exit codes
/// (validation/domain -> 2, numerical -> 3, I/O -> 4).
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed (non-convergence, non-finite value).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A query or configuration is rejected by a validity rule.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
