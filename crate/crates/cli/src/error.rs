use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config file or input files.
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] kinex_core::Error),

    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{failed} of {total} sweep points failed; see the index")]
    PartialSweep { failed: usize, total: usize },
}

impl CliError {
    /// 2 for invalid configuration, 3 for numeric or runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(kinex_core::Error::Domain(_) | kinex_core::Error::Unsupported(_)) => 2,
            CliError::Core(kinex_core::Error::Parse { .. }) => 2,
            _ => 3,
        }
    }
}

pub fn io_error(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
