use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fanerv::Error),

    #[error("cannot read config {path}: {detail}")]
    ConfigFile { path: PathBuf, detail: String },

    #[error("invalid override `{0}`: expected key=value")]
    Override(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;
