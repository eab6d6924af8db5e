//! Error type shared across the library.
//!
//! Variants distinguish problems the caller can fix by changing inputs or
//! configuration (dimension mismatches, domain violations, bad configs)
//! from numerical failures discovered mid-computation (non-positive-definite
//! matrices, degenerate linear systems). The CLI maps the former to exit
//! code 1 and the latter to exit code 2.

use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes of inputs do not agree (e.g. attribute rows vs. covariate rows).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A value or dataset violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration struct violates its invariants.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A matrix that must be symmetric positive definite is not.
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A regression design matrix is rank deficient.
    #[error("collinear design: {0}")]
    Collinear(String),

    /// A numerical routine failed to produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True when the error indicates bad caller input rather than a
    /// numerical failure encountered during computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_) | Error::InvalidInput(_) | Error::Config(_) | Error::Collinear(_)
        )
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
