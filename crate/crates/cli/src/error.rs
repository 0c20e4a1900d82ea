use crate::config::ConfigError;
use mdllab::experiments::ExperimentError;
use mdllab::solvers::SolverError;
use serde_json::json;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("output directory {0} is not empty")]
    OutputExists(PathBuf),
    #[error("incomplete run directory {dir}: {reason}")]
    Incomplete { dir: PathBuf, reason: String },
}

impl CliError {
    pub fn io(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
        move |source| CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } | CliError::OutputExists(_) | CliError::Incomplete { .. } => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(ConfigError::Read { .. }) => "config_read",
            CliError::Config(ConfigError::Parse(_)) => "config_parse",
            CliError::Config(ConfigError::Invalid(_)) => "config_invalid",
            CliError::Numerical(_) => "numerical",
            CliError::Io { .. } => "io",
            CliError::OutputExists(_) => "output_exists",
            CliError::Incomplete { .. } => "incomplete_run",
        }
    }

    /// One-line machine-readable report for stderr.
    pub fn to_json(&self) -> String {
        let mut v = json!({ "error": self.kind(), "exit_code": self.exit_code(), "message": self.to_string() });
        let path = match self {
            CliError::Config(ConfigError::Read { path, .. }) | CliError::Io { path, .. } | CliError::OutputExists(path) => Some(path),
            CliError::Incomplete { dir, .. } => Some(dir),
            _ => None,
        };
        if let Some(p) = path {
            v["path"] = json!(p.display().to_string());
        }
        v.to_string()
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(ConfigError::Invalid(e.to_string()))
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e.root() {
            SolverError::Spec(_) | SolverError::WrongKind { .. } => CliError::Config(ConfigError::Invalid(e.to_string())),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
