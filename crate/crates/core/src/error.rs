use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no parseable log records in {0}")]
    EmptyDocument(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("remote embedder transport error: {0}")]
    Transport(String),
    #[error("remote embedder returned status {0}")]
    Status(u16),
    #[error("malformed embedder response: {0}")]
    MalformedResponse(String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in embedding {index}")]
    NonFinite { index: usize },
    #[error("need at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("t-SNE diverged at iteration {iteration} (max |gradient| {max_gradient})")]
    Diverged { iteration: usize, max_gradient: f64 },
    #[error("training set contains a single class")]
    SingleClass,
    #[error("feature arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("cannot build {folds} folds: smallest class has {smallest} examples")]
    Folds { folds: usize, smallest: usize },
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("malformed artifact {path}: {reason}")]
    Artifact { path: PathBuf, reason: String },
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn artifact(path: impl AsRef<Path>, reason: impl ToString) -> Self {
        Error::Artifact {
            path: path.as_ref().to_path_buf(),
            reason: reason.to_string(),
        }
    }

    /// Stable variant name, used as the error tag on the command line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::EmptyDocument(_) => "EmptyDocument",
            Error::Config(_) => "Config",
            Error::Transport(_) => "Transport",
            Error::Status(_) => "Status",
            Error::MalformedResponse(_) => "MalformedResponse",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFinite { .. } => "NonFinite",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::Diverged { .. } => "Diverged",
            Error::SingleClass => "SingleClass",
            Error::Arity { .. } => "Arity",
            Error::Folds { .. } => "Folds",
            Error::MissingArtifact(_) => "MissingArtifact",
            Error::Artifact { .. } => "Artifact",
        }
    }
}
