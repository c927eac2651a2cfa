use std::path::{Path, PathBuf};

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("decode error: {0}")]
    Decode(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error(transparent)]
    Core(#[from] qwm_core::Error),

    #[error("trial {trial} of pirate {pirate}: {source}")]
    Trial { pirate: usize, trial: usize, source: Box<CliError> },

    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn decode(msg: impl Into<String>) -> Self {
        Self::Decode(msg.into())
    }

    pub fn parameter(msg: impl Into<String>) -> Self {
        Self::Parameter(msg.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        use qwm_core::Error as E;
        match self {
            Self::Usage(_) => 2,
            Self::Io { .. } => 3,
            Self::Decode(_) => 4,
            Self::Parameter(_) => 5,
            Self::Core(e) => match e {
                E::Decode(_) => 4,
                E::LengthMismatch { .. } | E::IndexOutOfRange { .. } | E::InvalidParameter(_) => 5,
                E::DimensionCap { .. } => 6,
                _ => 7,
            },
            Self::Trial { source, .. } => source.exit_code(),
            Self::Verify(_) => 8,
        }
    }
}
