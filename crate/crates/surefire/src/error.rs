use std::path::PathBuf;

use crate::data::DataError;
use crate::params::ParamsError;

/// Everything a command can fail with, grouped by process exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Data {
        path: PathBuf,
        #[source]
        source: DataError,
    },
    #[error("{}: {source}", path.display())]
    Params {
        path: PathBuf,
        #[source]
        source: ParamsError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: surefire_core::Error,
    },
    #[error("{0}")]
    Input(String),
}

impl AppError {
    pub const EXIT_USAGE: i32 = 1;
    pub const EXIT_DATA: i32 = 2;
    pub const EXIT_NUMERIC: i32 = 3;

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => Self::EXIT_USAGE,
            AppError::Core { source, .. } if source.is_numeric() => Self::EXIT_NUMERIC,
            AppError::Core { source: surefire_core::Error::InvalidConfig(_), .. } => Self::EXIT_USAGE,
            _ => Self::EXIT_DATA,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> AppError {
        let path = path.into();
        move |source| AppError::Io { path, source }
    }

    pub(crate) fn core(context: impl Into<String>) -> impl FnOnce(surefire_core::Error) -> AppError {
        let context = context.into();
        move |source| AppError::Core { context, source }
    }
}
