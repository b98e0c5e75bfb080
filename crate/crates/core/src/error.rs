use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("target column '{0}' not found in header")]
    MissingTarget(String),

    #[error("missing feature column '{0}'")]
    MissingColumn(String),

    #[error("row {row}, column '{column}': cannot use value {value:?} (expected a finite number)")]
    BadCell { row: usize, column: String, value: String },

    #[error("row {row} has {found} cells, header has {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },

    #[error("need at least 2 rows, found {0}")]
    TooFewRows(usize),

    #[error("need at least 1 feature column")]
    NoFeatures,

    #[error("degenerate target: all training targets are equal, so the objective normalizer is zero")]
    DegenerateTarget,

    #[error("split leaves the {0} portion empty")]
    EmptySplit(&'static str),

    #[error("empty row set")]
    EmptyRows,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("cannot branch: {0}")]
    InvalidBranch(String),

    #[error("unsupported model schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("exhaustive enumeration needs {count} structures, above the cap of {cap}")]
    OracleCapExceeded { count: String, cap: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
