use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("index out of bounds: {0}")]
    IndexOutOfBounds(String),

    #[error("enumeration guard exceeded: {profiles} profiles (limit {limit})")]
    EnumerationLimit { profiles: u128, limit: u128 },

    #[error("invalid kernel `{name}`: {reason}")]
    InvalidKernel { name: String, reason: String },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("bisection did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("action {action} is not supported both before and after the step")]
    Unsupported { action: usize },

    #[error("scores diverged at step {step}: {detail}")]
    Divergence { step: u64, detail: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad input rather than by a failing run.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Divergence { .. } | Error::NoConvergence(_) | Error::Io(_)
        )
    }
}
