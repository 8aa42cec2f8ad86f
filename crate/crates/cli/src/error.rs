use std::io;

use thiserror::Error;

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Usage = 2,
    ValidationFailed = 3,
    VerificationFailed = 4,
    CapExceeded = 5,
    Io = 6,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("invalid generator: {0}")]
    Validation(String),

    #[error("{0}")]
    CapExceeded(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Usage(_) => ExitStatus::Usage,
            CliError::Validation(_) => ExitStatus::ValidationFailed,
            CliError::CapExceeded(_) => ExitStatus::CapExceeded,
            CliError::Io(_) => ExitStatus::Io,
        }
    }
}

impl From<catdep::Error> for CliError {
    fn from(err: catdep::Error) -> Self {
        use catdep::Error as E;
        match err {
            E::AxiomViolation { .. } | E::IncompleteGenerator(_) => CliError::Validation(err.to_string()),
            E::EnumerationTooLarge { categories, cap, .. } => {
                let max = catdep::exact::max_enumerable_length(categories, cap);
                CliError::CapExceeded(format!("{err}; reduce N to at most {max} or raise --enumeration-cap"))
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}
