use std::path::PathBuf;

use thiserror::Error;

/// Errors of the file, runner and command-line layer.
///
/// Every variant maps onto one process exit status, see [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("missing {what}: {path} (run `uqforge {stage}` first)")]
    MissingInput { what: &'static str, path: PathBuf, stage: &'static str },

    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("{0}")]
    Precondition(String),

    #[error("{0}")]
    ExternalModel(String),

    #[error(transparent)]
    Core(#[from] uqforge_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Core(uqforge_core::Error::Parse { .. }) => 2,
            Self::MissingInput { .. } | Self::Schema { .. } | Self::Precondition(_) | Self::Core(_) => 3,
            Self::ExternalModel(_) => 4,
            Self::Io { .. } => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            3 => "precondition",
            4 => "external-model",
            _ => "io",
        }
    }

    /// Single-line `error kind=… code=…: message` form printed by the binary.
    pub fn one_line(&self) -> String {
        let message = self.to_string().replace(['\n', '\r'], " ");
        format!("error kind={} code={}: {}", self.kind(), self.exit_code(), message)
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }

    pub(crate) fn config(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Config { path: path.into(), message: message.into() }
    }

    pub(crate) fn schema(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Schema { path: path.into(), message: message.into() }
    }
}
