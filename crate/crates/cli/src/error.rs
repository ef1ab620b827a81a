use std::path::{Path, PathBuf};

use accrete_core::analytic::AnalyticError;
use accrete_core::model::ModelError;
use accrete_core::EngineError;
use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_GATE_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Params(#[from] ModelError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invariant(String),
    #[error("gate failure: {0}")]
    Gate(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::Params(_) | CliError::Analytic(_) | CliError::Io { .. } => {
                EXIT_USAGE
            }
            CliError::Invariant(_) => EXIT_INVARIANT,
            CliError::Gate(_) => EXIT_GATE_FAILURE,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Params(m) => CliError::Params(m),
            EngineError::Analytic(a) => CliError::Analytic(a),
            EngineError::Invariant(s) => CliError::Invariant(s),
        }
    }
}
