//! Command-line and HTTP front ends.

pub mod cli;
pub mod commands;
pub mod config;
pub mod service;

use std::path::{Path, PathBuf};

pub use config::{RunConfig, SynthConfig, Task};

use crate::error::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Failures of a command, by exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// Exit code 2: bad arguments, missing inputs, or outputs that exist.
    #[error("{0}")]
    Usage(String),
    /// Exit code 3: inputs that are present but malformed or inconsistent.
    #[error("{0}")]
    Data(String),
    /// Exit code 1: training aborts and other internal failures.
    #[error("{0}")]
    Internal(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Internal(_) => 1,
            AppError::Usage(_) => 2,
            AppError::Data(_) => 3,
        }
    }
}

impl From<Error> for AppError {
    fn from(e: Error) -> Self {
        match e {
            Error::DimensionMismatch { .. }
            | Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::Image(_)
            | Error::TooLarge(..)
            | Error::Io { .. } => AppError::Data(e.to_string()),
            Error::NotSubmodular { .. }
            | Error::CapacityExceeded { .. }
            | Error::QpNotConverged(_)
            | Error::QpInfeasible
            | Error::TrainingAborted(_) => AppError::Internal(e.to_string()),
        }
    }
}

pub type AppResult<T> = std::result::Result<T, AppError>;

/// Key/value provenance recorded in every artifact.
pub fn provenance(config: &RunConfig) -> Vec<(String, String)> {
    vec![
        ("version".into(), VERSION.into()),
        ("task".into(), config.task.name().into()),
        ("seed".into(), config.seed.to_string()),
        ("config".into(), config.to_json_line()),
    ]
}

/// Provenance as `# key value` lines, for CSV outputs.
pub(crate) fn provenance_comment(config: &RunConfig) -> String {
    provenance(config)
        .into_iter()
        .map(|(k, v)| format!("# {k} {v}\n"))
        .collect()
}

/// Refuses to replace an existing file or a nonempty directory unless
/// `force` is set.
pub(crate) fn check_output(path: &Path, force: bool) -> AppResult<()> {
    if force || !path.exists() {
        return Ok(());
    }
    if path.is_dir() {
        let empty = std::fs::read_dir(path)
            .map_err(|e| AppError::Usage(format!("{}: {e}", path.display())))?
            .next()
            .is_none();
        if empty {
            return Ok(());
        }
    }
    Err(AppError::Usage(format!(
        "{} already exists; pass --force to overwrite",
        path.display()
    )))
}

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> AppResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| AppError::Internal(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| AppError::Internal(format!("{}: {e}", path.display())))
}

pub(crate) fn read_text(path: &Path, what: &str) -> AppResult<String> {
    if !path.exists() {
        return Err(AppError::Usage(format!("{what} {} not found", path.display())));
    }
    std::fs::read_to_string(path).map_err(|e| AppError::Data(format!("{}: {e}", path.display())))
}

pub(crate) fn with_extension_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}
