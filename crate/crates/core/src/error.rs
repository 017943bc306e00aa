//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),

    #[error("wrong class count: {0}")]
    WrongClassCount(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("oracle mode does not fit the wrapped model: {0}")]
    ModeModelMismatch(String),

    #[error("operation not available in this oracle mode")]
    WrongMode,

    #[error("query budget exhausted")]
    BudgetExhausted,

    #[error("source flagged by the probe-burst detector; further queries refused")]
    Detected,

    #[error("singular probe system")]
    SingularSystem,

    #[error("oracle returned different answers for the same query")]
    InconsistentOracle,

    #[error("witness points have the same label")]
    SameLabelWitnesses,

    #[error("probe store is empty")]
    EmptyStore,

    #[error("empty candidate list")]
    EmptyCandidates,

    #[error("confidence out of range: {0}")]
    InvalidConfidence(f64),

    #[error("infeasible probe schedule: {0}")]
    InfeasibleSchedule(String),

    #[error("invalid campaign config: {0}")]
    ConfigInvalid(String),

    #[error("malformed data: {0}")]
    Parse(String),

    #[error("wire protocol error: {0}")]
    Protocol(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
