use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input text; `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// A contract violation in the inputs (dimension mismatch, empty corpus,
    /// preset mismatch and so on).
    #[error("{0}")]
    Invalid(String),

    #[error("numerical failure at iteration {iteration}: {message}")]
    Numerical { iteration: usize, message: String },

    #[error("malformed document: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
