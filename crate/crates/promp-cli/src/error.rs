use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes: 0 success, 2 input error, 3 numerical error,
/// 4 adaptation failure or declined trial.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("inconsistent dimensions: {0}")]
    InconsistentDimension(String),
    #[error("timestamps not strictly increasing: {0}")]
    NonMonotoneTime(String),
    #[error("{0}")]
    Input(String),
    #[error("no-move: {0}")]
    NoMove(String),
    #[error(transparent)]
    Core(#[from] promp_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. }
            | CliError::Parse { .. }
            | CliError::InconsistentDimension(_)
            | CliError::NonMonotoneTime(_)
            | CliError::Input(_) => 2,
            CliError::Core(promp_core::Error::Input(_)) => 2,
            CliError::Core(promp_core::Error::Numerical { .. }) => 3,
            CliError::Core(promp_core::Error::Adaptation { .. }) => 4,
            CliError::NoMove(_) => 4,
        }
    }
}
