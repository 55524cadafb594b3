use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh spec: {0}")]
    InvalidSpec(String),

    #[error("unknown boundary tag `{0}`")]
    UnknownTag(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e}){context}")]
    SolverFailure {
        iterations: usize,
        residual: f64,
        context: String,
    },

    #[error("optimization aborted at iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{field} {message}")]
    Validation { field: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
