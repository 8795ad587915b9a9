use std::path::PathBuf;

use thiserror::Error;

use crate::instance::ValidationErrors;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Validation(#[from] ValidationErrors),
    #[error("{file}: {message}")]
    Schema { file: PathBuf, message: String },
    #[error("{file} line {line}: {message}")]
    Csv {
        file: PathBuf,
        line: u64,
        message: String,
    },
    #[error("internal error: {0}")]
    Internal(String),
    #[error("brute force refused: {count} free binaries exceeds the limit of {limit}")]
    TooManyBinaries { count: usize, limit: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CoreError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
