use thiserror::Error;

/// Errors raised across the simulator, agents, and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("drift event for cell {cell} at t={t_start} already applied")]
    DriftAlreadyApplied { cell: String, t_start: u32 },

    #[error("simulation time {t} is out of step (expected {expected})")]
    OutOfStep { t: u32, expected: u32 },

    #[error("simulation finished after {duration} minutes")]
    PastDuration { duration: u32 },

    #[error("controller failed at t={t}: {reason}")]
    Controller { t: u32, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("training diverged at epoch {epoch}")]
    Diverged {
        epoch: usize,
        checkpoint: Option<Box<crate::learn::Checkpoint>>,
    },

    #[error("model {0} is not approved")]
    Unapproved(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("agent registry: {0}")]
    Registry(String),

    #[error("payload is not serializable: {0}")]
    Payload(String),

    #[error("audit chain: {0}")]
    Audit(String),

    #[error("deployment: {0}")]
    Deploy(String),

    #[error("csv parse error at line {line}: {reason}")]
    Csv { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
