use thiserror::Error;

/// Errors shared across the simulator crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its allowed domain. Always names the
    /// offending field.
    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// An operation was called on arguments outside its domain (empty pair
    /// class, empty server set, mismatched lengths, ...).
    #[error("{0}")]
    Domain(String),

    /// A structured text document failed to parse.
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn domain(reason: impl Into<String>) -> Self {
        Error::Domain(reason.into())
    }

    pub fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            line,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
