use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("analysis error: {0}")]
    Analysis(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Analysis(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.to_owned(),
            message: err.to_string(),
        }
    }
}

/// Errors raised by the pipeline itself, outside any file access.
impl From<rydtomo_core::Error> for CliError {
    fn from(e: rydtomo_core::Error) -> Self {
        use rydtomo_core::Error::*;
        match e {
            Fit(_) | Normalization(_) | InvalidState(_) => CliError::Analysis(e.to_string()),
            InvalidInput(_) | StepTooLarge { .. } => CliError::Config(e.to_string()),
            Format(_) | Io(_) | Csv(_) | Json(_) => CliError::Io {
                path: PathBuf::from("-"),
                message: e.to_string(),
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
