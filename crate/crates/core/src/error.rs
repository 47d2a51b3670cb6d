use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("schema declares {declared} columns but the file has {found}")]
    SchemaMismatch { declared: usize, found: usize },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("class column `{0}` has a single category; nothing to learn")]
    DegenerateClass(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("importance value {value} for ({feature}, {output}) lies outside [-1, 1]")]
    ImportanceRange {
        feature: String,
        output: String,
        value: f64,
    },

    #[error("blend weight p = {0} lies outside [0, 1]")]
    BlendWeight(f64),

    #[error("fingerprint mismatch: importance built for {expected}, dataset is {found}")]
    Fingerprint { expected: String, found: String },

    #[error("importance spec is required for the correlation-aided method")]
    MissingImportance,

    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
