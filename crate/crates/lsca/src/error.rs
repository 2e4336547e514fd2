//! Error type shared across the crate.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown dataset format `{0}` (expected dir, tsv, or tokenized-tsv)")]
    UnknownFormat(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("empty category directory `{0}`")]
    EmptyCategory(String),

    #[error("malformed record in {path}: {detail}")]
    MalformedRecord { path: PathBuf, detail: String },

    #[error("corpus collapse: {0}")]
    CorpusCollapse(String),

    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),

    #[error("row {row} has {detail}, cannot apply {scheme} weighting")]
    ZeroRow {
        row: usize,
        scheme: String,
        detail: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: String,
    },

    #[error("svd failed: {0}")]
    Svd(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of bounds for {len} {what}")]
    IndexOutOfBounds {
        index: usize,
        len: usize,
        what: String,
    },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("bad config: {0}")]
    Config(String),

    #[error("bad container file {path}: {detail}")]
    Container { path: PathBuf, detail: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable kind tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::UnknownFormat(_) => "unknown_format",
            Error::EmptyDataset(_) => "empty_dataset",
            Error::EmptyCategory(_) => "empty_category",
            Error::MalformedRecord { .. } => "malformed_record",
            Error::CorpusCollapse(_) => "corpus_collapse",
            Error::VocabularyMismatch(_) => "vocabulary_mismatch",
            Error::ZeroRow { .. } => "zero_row",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Svd(_) => "svd",
            Error::InvalidInput(_) => "invalid_input",
            Error::IndexOutOfBounds { .. } => "index_out_of_bounds",
            Error::InvalidSplit(_) => "invalid_split",
            Error::Config(_) => "config",
            Error::Container { .. } => "container",
        }
    }
}
