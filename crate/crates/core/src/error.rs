use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: expected {expected} columns, found {found}")]
    MalformedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {col}: cannot parse `{text}` as a number")]
    BadNumber { row: usize, col: usize, text: String },

    #[error("no frames in input")]
    NoFrames,

    #[error("feature {feature} is constant (min == max); cannot normalize")]
    ConstantFeature { feature: usize },

    #[error("training split is empty")]
    EmptyTrainingSplit,

    #[error("zero signal: sparsity analysis undefined")]
    ZeroSignal,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("cannot l2-normalize a zero measurement vector")]
    ZeroMeasurement,

    #[error("all sampled pairs are degenerate")]
    DegeneratePairs,

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
