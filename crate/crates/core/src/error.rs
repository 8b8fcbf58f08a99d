use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the explanation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("duplicate entry {entry:?} at line {line}")]
    DuplicateEntry { entry: String, line: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("index out of bounds: {0}")]
    Bounds(String),

    #[error("parse error at {context}: {message}")]
    Parse { context: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid model input: {0}")]
    Input(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("format error in field `{field}`: {message}")]
    Format { field: String, message: String },

    #[error("{players} players exceeds the exact enumeration limit of {limit}; use the kernel method")]
    Capacity { players: usize, limit: usize },

    #[error("singular regression system ({0})")]
    Numerical(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("report rejected: {0}")]
    Serialization(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
