use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("labels ({labels}) and feature rows ({rows}) differ in length")]
    LabelCountMismatch { labels: usize, rows: usize },

    #[error("dataset must have at least one feature column")]
    NoFeatures,

    #[error("non-finite feature value at row {row}, column {column}")]
    NonFiniteFeature { row: usize, column: usize },

    #[error("invalid label {value} at row {row}; expected -1 or +1")]
    InvalidLabel { row: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("pool must contain at least one source")]
    EmptyPool,

    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing label column `{0}`")]
    MissingLabelColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{cell}` as a number")]
    ParseCell {
        row: usize,
        column: String,
        cell: String,
    },

    #[error("row {row}, column `{column}`: label `{cell}` is outside the {encoding} encoding")]
    LabelOutsideEncoding {
        row: usize,
        column: String,
        cell: String,
        encoding: &'static str,
    },

    #[error("row {row} has {found} cells, header has {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),

    #[error("dataset with {samples} samples is too small for {parts} parts")]
    TooFewSamples { samples: usize, parts: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite objective value encountered at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("non-finite gradient reported by source {source_index} in round {round}")]
    NonFiniteGradient { source_index: usize, round: usize },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
