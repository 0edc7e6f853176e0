use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed graph file (line {line}): {reason}")]
    Malformed { line: usize, reason: String },

    #[error("edge ({child}, {target}) on line {line} attaches to a vertex that has not arrived yet")]
    ArrivalOrder {
        line: usize,
        child: usize,
        target: usize,
    },

    #[error("graph file truncated: expected {expected} edges, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("invalid sweep configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
