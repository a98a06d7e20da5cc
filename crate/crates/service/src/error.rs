use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use flightstat::Error;
use serde_json::json;

/// An HTTP error with the `{ "error", "id" }` body.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Argument(_) | Error::UnknownCategory { .. } => StatusCode::BAD_REQUEST,
            Error::NotFound(_) => StatusCode::NOT_FOUND,
            Error::Unresolvable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Error::SessionClosed => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let id = uuid::Uuid::new_v4().simple().to_string();
        // internal details stay in the server log; clients get the id
        let message = if self.status.is_server_error() {
            eprintln!("error {id}: {}", self.message);
            "internal error".to_string()
        } else {
            self.message
        };
        (self.status, Json(json!({ "error": message, "id": id }))).into_response()
    }
}
