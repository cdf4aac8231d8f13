use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical integration did not converge: {0}")]
    Integration(String),

    #[error("mesh: {0}")]
    Mesh(String),

    #[error("assembly: {0}")]
    Assembly(String),

    #[error("linear solver failed ({reason}), relative residual {residual:e}")]
    LinearSolver { reason: String, residual: f64 },

    #[error("residual evaluation produced a non-finite value in cell {cell}")]
    NonFinite { cell: usize },

    #[error("singular configuration: {0}")]
    Singular(String),

    #[error("problem too large for the dense oracle: {cells} cells (limit {limit})")]
    ScaleGuard { cells: usize, limit: usize },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
