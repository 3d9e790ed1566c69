use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{what} `{id}` not found")]
    NotFound { what: &'static str, id: String },

    #[error("session `{session_id}` is excluded from the experiment")]
    Excluded { session_id: String, retained_samples: usize },

    #[error("{message}")]
    Validation { message: String, detail: Value },

    #[error("{message}")]
    Precondition { message: String, detail: Value },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("service not ready: {0}")]
    State(String),

    #[error("admin token missing or wrong")]
    Unauthorized,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("storage failure: {0}")]
    Storage(#[from] std::io::Error),

    #[error("corrupt log at line {line}: {message}")]
    CorruptLog { line: usize, message: String },
}

impl ServiceError {
    /// Stable machine-readable code used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound { .. } => "not_found",
            ServiceError::Excluded { .. } => "session_excluded",
            ServiceError::Validation { .. } => "validation_failed",
            ServiceError::Precondition { .. } => "precondition_failed",
            ServiceError::Parameter(_) => "bad_parameter",
            ServiceError::State(_) => "service_state",
            ServiceError::Unauthorized => "unauthorized",
            ServiceError::Config(_) => "config",
            ServiceError::Storage(_) | ServiceError::CorruptLog { .. } => "storage",
        }
    }

    pub fn detail(&self) -> Value {
        match self {
            ServiceError::Validation { detail, .. } | ServiceError::Precondition { detail, .. } => detail.clone(),
            ServiceError::Excluded { retained_samples, .. } => {
                serde_json::json!({ "retained_samples": retained_samples })
            }
            ServiceError::NotFound { id, .. } => serde_json::json!({ "id": id }),
            _ => Value::Null,
        }
    }

    pub(crate) fn validation(message: impl Into<String>, detail: Value) -> Self {
        ServiceError::Validation { message: message.into(), detail }
    }
}
