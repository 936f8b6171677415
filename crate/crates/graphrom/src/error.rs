use std::path::Path;

use graphrom_core::Error as CoreError;

/// Failure categories of the command line; each maps to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type AppResult<T> = Result<T, AppError>;

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Data(_) | AppError::Io { .. } => 3,
            AppError::Assertion(_) => 4,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Core errors raised while building from configuration: bad parameters are
    /// the config's fault, everything else is the data's.
    pub fn from_core(context: &str, e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { .. } | CoreError::UnknownName(_) => {
                AppError::Config(format!("{context}: {e}"))
            }
            _ => AppError::Data(format!("{context}: {e}")),
        }
    }
}
