use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl From<kcrf::Error> for CliError {
    fn from(e: kcrf::Error) -> Self {
        match e {
            kcrf::Error::Numerical { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

/// Attaches the file name to errors raised while interpreting its contents.
pub fn in_file(path: &Path) -> impl Fn(kcrf::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
        other => other,
    }
}

pub type CliResult<T> = Result<T, CliError>;
