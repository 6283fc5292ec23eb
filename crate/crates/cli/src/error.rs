use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: configuration, dimensions, malformed files.
    #[error("{0}")]
    Validation(String),

    /// A certificate or an invariant check failed.
    #[error("{0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Ldr(#[from] ldrkit::LdrError),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn invariant(msg: impl Into<String>) -> Self {
        CliError::Invariant(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 validation, 2 certificate/invariant, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        use ldrkit::LdrError::*;
        match self {
            CliError::Validation(_) => 1,
            CliError::Invariant(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Ldr(e) => match e {
                Certificate { .. } | SelectorNotFound { .. } | SingularSelector { .. } => 2,
                _ => 1,
            },
        }
    }
}
