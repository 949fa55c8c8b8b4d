use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A hypothesis on the problem data is violated. `hypothesis` names it
    /// (e.g. `"f2"`, `"V1"`, `"M1"`, `"tau<theta"`).
    #[error("configuration rejected [{hypothesis}]: {message}")]
    Config {
        hypothesis: &'static str,
        message: String,
    },

    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("Nehari projection failed: {0}")]
    Projection(String),

    #[error("nodal degeneracy: {0}")]
    NodalDegeneracy(String),

    #[error("penalized nonlinearity violates [{constraint}]: {message}")]
    Construction {
        constraint: &'static str,
        message: String,
    },

    #[error("initialization error: {0}")]
    Initialization(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("ground-energy table rejected: {0}")]
    Table(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(hypothesis: &'static str, message: impl Into<String>) -> Self {
        Error::Config {
            hypothesis,
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

pub type Result<T, E = Error> = std::result::Result<T, E>;
