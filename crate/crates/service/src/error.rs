use std::path::{Path, PathBuf};

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use ivispar_core::engine::SessionStatus;
use ivispar_core::generator::DatasetError;
use serde_json::json;
use thiserror::Error;

/// Startup failures.
#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("dataset {path}: {source}")]
    Dataset { path: PathBuf, source: DatasetError },
}

impl ServiceError {
    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        ServiceError::Io { path: path.as_ref().to_path_buf(), source }
    }
}

/// Request failures, each mapped to one HTTP status.
#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("session `{0}` expired after being idle")]
    Expired(String),
    #[error("session is {0}")]
    Conflict(SessionStatus),
    #[error("{0}")]
    Unsupported(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub(crate) fn internal(e: impl std::fmt::Display) -> Self {
        ApiError::Internal(e.to_string())
    }

    pub fn status_code(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Expired(_) => StatusCode::GONE,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Unsupported(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ApiError::NotFound(_) => "not_found",
            ApiError::Expired(_) => "expired",
            ApiError::Conflict(_) => "session_terminal",
            ApiError::Unsupported(_) => "unsupported_modality",
            ApiError::BadRequest(_) => "bad_request",
            ApiError::Internal(_) => "internal",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if let ApiError::Internal(msg) = &self {
            tracing::error!("{msg}");
        }
        let mut body = json!({ "error": self.code(), "message": self.to_string() });
        if let ApiError::Conflict(status) = &self {
            body["status"] = json!(status);
        }
        (self.status_code(), Json(body)).into_response()
    }
}
