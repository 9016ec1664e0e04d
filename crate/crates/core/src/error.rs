use crate::corpus::ActionId;

/// Errors produced by corpus loading, graph queries, and model plumbing.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty corpus")]
    EmptyCorpus,

    #[error("line {line}: malformed record: {msg}")]
    MalformedRecord { line: usize, msg: String },

    #[error("plan too short ({got} steps, need at least 2)")]
    PlanTooShort { got: usize },

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("unknown node {0}")]
    UnknownNode(ActionId),

    #[error("no walk connects the requested endpoints")]
    NoWalk,

    #[error("walk of {len} nodes exceeds horizon {horizon}")]
    WalkTooLong { len: usize, horizon: usize },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("training diverged at step {step} (loss {loss})")]
    Diverged { step: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
