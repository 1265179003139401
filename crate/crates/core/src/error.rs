use thiserror::Error;

#[derive(Debug, Error)]
pub enum RareError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("header is missing mapped column `{0}`")]
    MissingColumn(String),

    #[error("dataset is empty after filtering with min_count = {min_count}")]
    EmptyDataset { min_count: usize },

    #[error("user `{user}` has {count} interactions, a chronological split needs at least 3")]
    TooFewInteractions { user: String, count: usize },

    #[error("user `{user}` has {available} candidate negatives but {requested} were requested")]
    NegativePoolTooSmall {
        user: String,
        available: usize,
        requested: usize,
    },

    #[error("rating counts are all zero")]
    EmptyCounts,

    #[error("invalid Weibull parameters: shape = {shape}, rate = {rate}")]
    InvalidWeibull { shape: f64, rate: f64 },

    #[error("invalid rating distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid prospect parameters: {0}")]
    InvalidParams(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("batch is empty")]
    EmptyBatch,

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0} probe pairs given, at least 10 are required")]
    TooFewProbes(usize),

    #[error("infeasible synthetic spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, RareError>;
