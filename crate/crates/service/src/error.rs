use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use birs_core::planner::PlanError;
use birs_core::sim::SimError;
use serde_json::{json, Value};

/// An error as the API reports it inside the `{ok: false, error}` envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    /// Stable machine-readable kind, e.g. `no-path`.
    pub kind: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            kind,
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "validation", message)
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    pub fn unknown_room(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown-room", format!("unknown room {id}"))
            .with_details(json!({ "room_id": id }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<SimError> for ApiError {
    fn from(e: SimError) -> Self {
        let message = e.to_string();
        match e {
            SimError::UnknownRoom(id) | SimError::Plan(PlanError::UnknownRoom(id)) => ApiError::unknown_room(&id),
            SimError::Plan(PlanError::SameEndpoints(_)) => ApiError::validation(message),
            SimError::Plan(PlanError::NoPath { from, to }) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "no-path", message)
                    .with_details(json!({ "from": from, "to": to }))
            }
            SimError::Plan(PlanError::NonLinear(_)) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "non-linear", message)
            }
            SimError::Nav(_) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "navigation", message),
            SimError::Grid(_) => ApiError::internal(message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "kind": self.kind, "message": self.message });
        if let Some(d) = self.details {
            error["details"] = d;
        }
        (self.status, Json(json!({ "ok": false, "error": error }))).into_response()
    }
}

/// `{ok: true, data}`.
pub fn ok<T: serde::Serialize>(data: T) -> Response {
    Json(json!({ "ok": true, "data": data })).into_response()
}
