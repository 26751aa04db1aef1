use thiserror::Error;

/// Errors raised by the simulator's core operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("empty dataset: {0}")]
    EmptyData(String),
    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),
    #[error("invalid prune config: {0}")]
    InvalidPruneConfig(String),
    #[error("invalid model pool: {0}")]
    InvalidPool(String),
    #[error("no pool entry fits capacity {capacity} (smallest entry has {smallest} parameters)")]
    NoFit { capacity: u64, smallest: u64 },
    #[error("returned model is not a sub-slice of the dispatched model: {0}")]
    NotSubSlice(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("partition failed: {0}")]
    Partition(String),
    #[error("dataset format: {0}")]
    DatasetFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
