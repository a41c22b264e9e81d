use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, malformed, or out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// A runtime value violated a domain constraint (confidence outside [0,1], negative energy, ...).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("request {got} is out of order: last logged id is {last}")]
    Ordering { last: u64, got: u64 },

    #[error("no data in window")]
    NoData,

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

/// Broad failure categories, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Io,
    Internal,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_)
            | Error::Validation(_)
            | Error::Ordering { .. }
            | Error::NoData
            | Error::Calibration(_)
            | Error::Parse { .. } => ErrorCategory::Validation,
            Error::Io { .. } | Error::Csv { .. } => ErrorCategory::Io,
            Error::Internal(_) => ErrorCategory::Internal,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::Validation => 2,
            ErrorCategory::Io => 3,
            ErrorCategory::Internal => 4,
        }
    }
}
