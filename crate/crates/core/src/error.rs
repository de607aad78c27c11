use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed trace record at byte {offset}: {message}")]
    MalformedTrace { offset: usize, message: String },

    #[error("stage map line {line}: {message}")]
    StageMap { line: usize, message: String },

    #[error("invalid bundle metadata: {0}")]
    Meta(String),

    #[error("bundle {0} is marked failed by the recorder")]
    FailedCrawl(String),

    #[error("bundle has no trace events")]
    EmptyTrace,

    #[error("bundle has no network requests")]
    EmptyNetworkLog,

    #[error("total {0} time is zero")]
    ZeroTotal(&'static str),

    #[error("score file {path}: {message}")]
    ScoreFile { path: PathBuf, message: String },

    #[error("graph import: {0}")]
    GraphImport(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
