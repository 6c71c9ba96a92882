use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use cptwb_core::{Error, StoreError};

/// Error payload: `{error, detail, path}` with an HTTP status.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub name: String,
    pub detail: String,
    pub path: Option<String>,
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    detail: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    path: Option<&'a str>,
}

impl ApiError {
    pub fn new(status: StatusCode, name: &str, detail: impl Into<String>) -> Self {
        ApiError {
            status,
            name: name.to_owned(),
            detail: detail.into(),
            path: None,
        }
    }

    pub fn unknown_network(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "UnknownNetwork",
            format!("no network `{id}`"),
        )
    }

    pub fn unknown_editor(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "UnknownEditor",
            format!("no editor `{id}`"),
        )
    }

    pub fn conflict(expected: u64, current: u64) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "VersionConflict",
            format!("expected version {expected}, current is {current}"),
        )
    }

    pub fn bad_request(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", detail)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::UnknownNode(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.name(), e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            name: e.name().to_owned(),
            path: Some(e.path().to_owned()),
            detail: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            error: &self.name,
            detail: &self.detail,
            path: self.path.as_deref(),
        };
        (self.status, Json(body)).into_response()
    }
}
