use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A documented input precondition does not hold (bad n, bad range, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("state space of {states} states exceeds the cap of {cap}")]
    SizeCap { states: usize, cap: usize },
    #[error("linear solve failed: {0}")]
    Singular(String),
    #[error("iteration did not converge: {0}")]
    NotConverged(String),
    #[error("no comparison path supplied for edge {0}")]
    MissingPath(String),
    #[error("config error in field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition(msg()))
    }
}
