use std::path::PathBuf;

use thermo_core::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config {path}: {message} (at `{schema_path}`)")]
    ConfigInvalid { path: PathBuf, schema_path: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("writing table: {0}")]
    Csv(#[from] csv::Error),

    #[error("encoding report: {0}")]
    Json(#[from] serde_json::Error),

    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 config or argument, 3 budget, 4 convergence, 5 verification, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigInvalid { .. } | CliError::Usage(_) => 2,
            CliError::VerificationFailed(_) => 5,
            CliError::Core(e) => match e {
                CoreError::InvalidModel(_) | CoreError::InvalidArgument(_) => 2,
                CoreError::BudgetExceeded { .. } | CoreError::DepthInsufficient { .. } => 3,
                CoreError::NewtonDivergence { .. }
                | CoreError::ContinuationFailure { .. }
                | CoreError::DegenerateSingularValues { .. }
                | CoreError::NoSignChange { .. } => 4,
                _ => 1,
            },
            CliError::Io { .. } | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}
