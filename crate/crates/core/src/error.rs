use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: malformed record: {reason}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("empty source in record `{id}`")]
    EmptySource { id: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("unknown label `{label}` (not in vocabulary)")]
    UnknownLabel { label: String },

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("invalid split ratios: {0}")]
    InvalidSplit(String),

    #[error("dataset too small to split")]
    DatasetTooSmall,

    #[error("line {line}: {reason}")]
    Lex { line: usize, reason: String },

    #[error("unbalanced delimiters at line {line}")]
    UnbalancedDelimiters { line: usize },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("no feature passed chi-square selection at p < {p_threshold}")]
    NoFeaturesSelected { p_threshold: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("dimensionality mismatch: model has {expected} features, vector has {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-binary entry {value} in row `{id}`")]
    NonBinary { id: String, value: i64 },

    #[error("distinguishing tokens undefined for a single type")]
    SingleType,

    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("no syntactic elements for id `{0}`")]
    MissingElements(String),

    #[error("id mismatch between predictions and truth: {0}")]
    IdMismatch(String),

    #[error("artifact chain mismatch: {0}")]
    ChainMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
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

    /// Whether the error stems from how the program was invoked rather than
    /// from the data it processed.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
