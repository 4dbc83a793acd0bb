use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A constraint set admits no point; `constraint` names the binding one.
    #[error("infeasible: {constraint}")]
    Infeasible { constraint: String },

    #[error("matrix is not positive semidefinite: {0}")]
    NotPsd(String),

    #[error("conic solver failure: {0}")]
    Solver(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    /// Serializing results failed before reaching the filesystem.
    #[error("writing output: {0}")]
    Output(String),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn infeasible(constraint: impl Into<String>) -> Self {
        Error::Infeasible {
            constraint: constraint.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
