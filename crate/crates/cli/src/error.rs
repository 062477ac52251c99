use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },

    #[error("{}: {message}", path.display())]
    Scenario { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Core { path: PathBuf, source: czreach_core::Error },

    #[error("plot needs at least two state dimensions, got {0}")]
    Dimension(usize),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    pub fn scenario(path: &Path, message: impl Into<String>) -> Self {
        CliError::Scenario { path: path.to_path_buf(), message: message.into() }
    }

    pub fn core(path: &Path, source: czreach_core::Error) -> Self {
        CliError::Core { path: path.to_path_buf(), source }
    }
}
