use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("`{stage}` needs the `{needs}` stage to have run first ({marker} not found)")]
    MissingStage {
        stage: &'static str,
        needs: &'static str,
        marker: PathBuf,
    },
    #[error("work directory {0} is locked by another command (remove the lock file if no command is running)")]
    Locked(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Core(#[from] foldscan_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit status: 2 I/O and run-time failures, 3 missing upstream
    /// stage, 4 invalid configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 4,
            CliError::MissingStage { .. } => 3,
            CliError::Locked(_) | CliError::Io { .. } | CliError::Core(_) => 2,
        }
    }
}
