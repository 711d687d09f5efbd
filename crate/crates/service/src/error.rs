//! JSON error responses with stable machine-readable codes.

use axum::extract::rejection::JsonRejection;
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use egoassist_core::config::ConfigError;
use egoassist_core::jobs::JobError;
use egoassist_core::session::{NextStep, SessionError};
use serde::{Deserialize, Serialize};

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_after_s: Option<u64>,
    /// The system-error turn recorded when a prediction failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<Box<NextStep>>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                retry_after_s: None,
                next: None,
            },
        }
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    pub fn unavailable(message: impl Into<String>, retry_after_s: u64) -> Self {
        let mut e = Self::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "provider_unavailable",
            message,
        );
        e.body.retry_after_s = Some(retry_after_s);
        e
    }

    pub fn session(e: &SessionError, retry_after_s: u64) -> Self {
        let status = if matches!(e, SessionError::UnknownSession(_)) {
            StatusCode::NOT_FOUND
        } else if e.is_conflict() {
            StatusCode::CONFLICT
        } else if e.is_provider() {
            let mut err = Self::unavailable(e.to_string(), retry_after_s);
            err.body.code = e.code().to_string();
            return err;
        } else if matches!(e, SessionError::Io(_)) {
            StatusCode::INTERNAL_SERVER_ERROR
        } else {
            StatusCode::BAD_REQUEST
        };
        Self::new(status, e.code(), e.to_string())
    }

    pub fn config(e: &ConfigError, retry_after_s: u64) -> Self {
        match e {
            ConfigError::Provider(_) => Self::unavailable(e.to_string(), retry_after_s),
            _ => Self::bad_request("invalid_config", e.to_string()),
        }
    }

    pub fn job(e: &JobError, retry_after_s: u64) -> Self {
        if e.is_provider() {
            Self::unavailable(e.to_string(), retry_after_s)
        } else if e.is_usage() {
            Self::bad_request("invalid_request", e.to_string())
        } else {
            Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_data",
                e.to_string(),
            )
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::bad_request("invalid_body", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let retry = self.body.retry_after_s;
        let mut resp = (self.status, Json(self.body)).into_response();
        if let Some(s) = retry {
            resp.headers_mut()
                .insert(header::RETRY_AFTER, HeaderValue::from(s));
        }
        resp
    }
}
