use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the cardgauge library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("http request to {url} failed: {reason}")]
    Http { url: String, reason: String },

    /// A listing page could not be fetched even after retries. The cursor is
    /// the page URL to resume from.
    #[error("listing aborted at cursor {cursor}: {reason}")]
    PageFetch { cursor: String, reason: String },

    #[error("malformed listing page {page}: {reason}")]
    MalformedPage { page: String, reason: String },

    #[error("{path}:{line}: {reason}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("card path collision: {first} and {second} both map to {path}")]
    PathCollision {
        first: String,
        second: String,
        path: String,
    },

    #[error("unknown format: {0}")]
    UnknownFormat(String),

    #[error("stage {stage}: missing input {path}; run stage `{producer}` first")]
    MissingPrerequisite {
        stage: String,
        path: PathBuf,
        producer: String,
    },

    #[error("stage {stage} failed: {reason}")]
    Stage { stage: String, reason: String },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
