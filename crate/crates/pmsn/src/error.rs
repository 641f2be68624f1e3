use std::path::{Path, PathBuf};

use pmsn_core::Error as CoreError;

/// Errors of the IO, training and command-line layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error at byte {offset}: {msg}")]
    Parse { path: PathBuf, offset: u64, msg: String },
    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failure: {0}")]
    Validation(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn parse(path: impl AsRef<Path>, offset: u64, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.as_ref().to_path_buf(),
            offset,
            msg: msg.into(),
        }
    }

    pub fn format(path: impl AsRef<Path>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.as_ref().to_path_buf(),
            msg: msg.into(),
        }
    }

    /// Process exit code: 1 validation or configuration, 2 numeric, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(CoreError::NumericFailure(_)) | Error::Numeric(_) => 2,
            Error::Core(_) | Error::Config(_) | Error::Validation(_) => 1,
            Error::Io { .. } | Error::Parse { .. } | Error::Format { .. } => 3,
        }
    }
}
