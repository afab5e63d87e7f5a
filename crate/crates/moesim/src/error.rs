use std::path::Path;

use thiserror::Error;

/// Crate-wide error type. Each variant maps to one stable CLI exit code
/// (see `cli::exit_code`).
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid value or shape in a domain object (config field, matrix dims, ...).
    #[error("{0}")]
    Domain(String),

    /// A caller broke an API contract (e.g. handed a stale row maximum).
    #[error("contract violation: {0}")]
    Contract(String),

    /// An input file could not be read or did not match its schema.
    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    /// The search terminated without a usable result.
    #[error("search failed: {0}")]
    Search(String),

    /// A design does not fit the platform budget.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Analytical and simulated paths disagreed beyond tolerance.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn parse(path: &Path, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.display().to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
