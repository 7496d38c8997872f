use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("quadrature of exactness {requested} not available (maximum {max})")]
    UnsupportedDegree { requested: usize, max: usize },

    #[error("unsupported configuration: {0}")]
    UnsupportedConfig(String),

    #[error("block {block} is not symmetric positive definite (assembly bug)")]
    NotSpd { block: usize },

    #[error("{method} did not converge in {iterations} iterations (relative residual {residual:e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("Picard iteration did not converge in {} iterations; last increments {:?}", history.len(), history)]
    Picard { history: Vec<f64> },

    #[error("non-finite state after step {step}")]
    BlowUp { step: usize },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the CLI: 1 usage/config, 2 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. }
            | Error::Picard { .. }
            | Error::BlowUp { .. }
            | Error::NotSpd { .. }
            | Error::Eval(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
