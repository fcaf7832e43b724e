use thiserror::Error;

/// Errors produced by design construction, fitting and the theory lab.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("group {group} is singular: X_j'X_j/n is not positive definite")]
    SingularGroup { group: usize },

    #[error("group label {label} has no columns")]
    EmptyGroup { label: i64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("penalty family {0} is not supported here")]
    UnsupportedFamily(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("gamma = {gamma} is outside the admissible range for {family}")]
    GammaOutOfRange { family: String, gamma: f64 },

    #[error("solver did not converge within {max_iter} iterations")]
    MaxIterExceeded { max_iter: usize },

    #[error("design must be group-orthonormalized for this solver")]
    NotOrthonormalized,

    #[error("design must be column-standardized (not orthonormalized) for this solver")]
    NotStandardized,

    #[error("fold too small: {0}")]
    FoldTooSmall(String),

    #[error("support design X_S'X_S is singular")]
    SingularSupport,

    #[error("subset enumeration too large ({count} subsets, limit {limit})")]
    TooLarge { count: u128, limit: u128 },

    #[error("bad scenario: {0}")]
    BadSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
