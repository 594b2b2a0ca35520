use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lcsched_core::Violation;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{message}")]
    BadRequest { message: String, violations: Vec<Violation> },

    #[error("unknown session {0}")]
    NotFound(String),

    #[error("observations do not match the round's expected iterations")]
    Mismatch { missing: Vec<String>, unexpected: Vec<String> },

    #[error("session {0} has completed all rounds")]
    Completed(String),

    #[error("no schedule can be constructed: {0}")]
    Unschedulable(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("corrupt event log {path}: {message}")]
    CorruptLog { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::BadRequest {
            message: message.into(),
            violations: Vec::new(),
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            Self::BadRequest { .. } => StatusCode::BAD_REQUEST,
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::Mismatch { .. } => StatusCode::CONFLICT,
            Self::Completed(_) => StatusCode::GONE,
            Self::Unschedulable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        let mut body = json!({ "error": self.to_string() });
        match &self {
            Self::BadRequest { violations, .. } if !violations.is_empty() => {
                body["violations"] = json!(violations);
                body["violation_messages"] = json!(violations.iter().map(ToString::to_string).collect::<Vec<_>>());
            }
            Self::Mismatch { missing, unexpected } => {
                body["missing"] = json!(missing);
                body["unexpected"] = json!(unexpected);
            }
            _ => {}
        }
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (status, Json(body)).into_response()
    }
}
