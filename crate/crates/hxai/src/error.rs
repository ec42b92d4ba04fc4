use serde_json::{json, Value};
use thiserror::Error;

/// Failures of the command-line and HTTP front ends. Engine errors are
/// wrapped unchanged.
#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Engine(#[from] hxai_core::Error),
    /// Malformed flags or request bodies.
    #[error("{0}")]
    Usage(String),
    #[error("{what} `{id}` not found")]
    NotFound { what: &'static str, id: String },
    #[error("{what} `{id}` already exists")]
    Conflict { what: &'static str, id: String },
    #[error("session `{0}` is already answering a question")]
    Busy(String),
    #[error("session `{0}` has a full backlog")]
    BacklogFull(String),
    #[error("missing or invalid bearer token")]
    Unauthorized,
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e.to_string())
    }
}

pub type AppResult<T> = std::result::Result<T, AppError>;

impl AppError {
    /// Stable machine-readable name: the engine variant for engine errors.
    pub fn kind(&self) -> String {
        match self {
            AppError::Engine(e) => {
                let debug = format!("{e:?}");
                debug
                    .split(|c: char| !c.is_alphanumeric())
                    .next()
                    .unwrap_or_default()
                    .to_string()
            }
            AppError::Usage(_) => "Usage".into(),
            AppError::NotFound { .. } => "NotFound".into(),
            AppError::Conflict { .. } => "Conflict".into(),
            AppError::Busy(_) => "Busy".into(),
            AppError::BacklogFull(_) => "BacklogFull".into(),
            AppError::Unauthorized => "Unauthorized".into(),
            AppError::Io(_) => "Io".into(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }

    /// Usage error for a JSON body or file that failed to deserialize;
    /// serde's message names the offending field.
    pub fn invalid_json(context: &str, e: serde_json::Error) -> Self {
        AppError::Usage(format!("{context}: {e}"))
    }
}
