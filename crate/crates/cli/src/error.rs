//! CLI failure type carrying the process exit code.
//!
//! Validation failures (bad flags, malformed configs or data files,
//! inconsistent inputs) exit with code 1; runtime failures (numerical
//! breakdown mid-run, output writes) exit with code 2.

use std::path::Path;

/// A command failure with its exit-code class.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The invocation or its inputs are invalid.
    #[error("{0}")]
    Validation(String),

    /// The run itself failed after inputs were accepted.
    #[error("{0}")]
    Runtime(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError::Validation(message.into())
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        CliError::Runtime(message.into())
    }

    /// Process exit code for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<latentsna::Error> for CliError {
    fn from(err: latentsna::Error) -> Self {
        if err.is_validation() {
            CliError::Validation(err.to_string())
        } else {
            CliError::Runtime(err.to_string())
        }
    }
}

/// Reads a UTF-8 input file, reporting a validation error naming the path.
pub fn read_input(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))
}
