use std::path::PathBuf;

use netstress_core::Error as CoreError;

/// Exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit status for failures that are neither usage nor divergence errors.
pub const EXIT_FAILURE: i32 = 1;
/// Exit status for invalid arguments, config files and input matrices.
pub const EXIT_USAGE: i32 = 2;
/// Exit status when trajectories or matrix exponentials diverge.
pub const EXIT_DIVERGENCE: i32 = 3;

/// Errors of the command line application and the experiment drivers.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Bad flag, config key or value.
    #[error("usage error: {0}")]
    Usage(String),
    /// Model or numerical failure, with the point of the sweep it hit.
    #[error("{context}: {source}")]
    Model {
        /// Where the failure happened (for example `gamma = 4`).
        context: String,
        /// Underlying error.
        #[source]
        source: CoreError,
    },
    /// The run would overflow before it finishes.
    #[error("divergence: {0}")]
    Divergence(String),
    /// Reading or writing a file failed.
    #[error("{}: {source}", path.display())]
    Io {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },
    /// A file could not be parsed.
    #[error("{}: {reason}", path.display())]
    Parse {
        /// Offending path.
        path: PathBuf,
        /// What was wrong.
        reason: String,
    },
    /// Serialisation failure.
    #[error("serialisation failed: {0}")]
    Serialize(String),
}

impl AppError {
    /// Wraps a core error with sweep context.
    pub fn model(context: impl Into<String>, source: CoreError) -> Self {
        AppError::Model {
            context: context.into(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) | AppError::Parse { .. } => EXIT_USAGE,
            AppError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => EXIT_USAGE,
            AppError::Divergence(_) => EXIT_DIVERGENCE,
            AppError::Model { source, .. } => match source {
                CoreError::InvalidParameter { .. } | CoreError::Dimension(_) => EXIT_USAGE,
                CoreError::Divergence(_) | CoreError::TrialsDiverged { .. } => EXIT_DIVERGENCE,
                CoreError::Tolerance { .. } => EXIT_FAILURE,
            },
            AppError::Io { .. } | AppError::Serialize(_) => EXIT_FAILURE,
        }
    }
}

impl From<CoreError> for AppError {
    fn from(source: CoreError) -> Self {
        AppError::model("model", source)
    }
}

/// Result alias for the application crate.
pub type Result<T> = std::result::Result<T, AppError>;
