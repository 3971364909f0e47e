use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("label column `{0}` not found")]
    MissingLabel(String),
    #[error("label column is not binary: {0}")]
    NonBinaryLabel(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("split error: {0}")]
    Split(String),
    #[error("feature `{0}` not found")]
    MissingFeature(String),
    #[error("unsupported model format version {0}")]
    UnknownVersion(u32),
    #[error("malformed model: {0}")]
    MalformedModel(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("metric error: {0}")]
    Metric(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
