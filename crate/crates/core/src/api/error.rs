use axum::extract::multipart::MultipartError;
use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use crate::certificate::CertificateError;
use crate::domain::Violation;
use crate::persistence::{Refusal, StoreError};

/// The complete set of error codes the API can return.
///
/// | code                | status |
/// |---------------------|--------|
/// | BAD_REQUEST         | 400    |
/// | UNAUTHORIZED        | 401    |
/// | FORBIDDEN           | 403    |
/// | NOT_FOUND           | 404    |
/// | CONFLICT            | 409    |
/// | DUPLICATE           | 409    |
/// | CAPACITY_FULL       | 409    |
/// | ALREADY_ENROLLED    | 409    |
/// | SEMINAR_NOT_OPEN    | 409    |
/// | ALREADY_FINALIZED   | 409    |
/// | PAYLOAD_TOO_LARGE   | 413    |
/// | VALIDATION_FAILED   | 422    |
/// | INTERNAL            | 500    |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    BadRequest,
    Unauthorized,
    Forbidden,
    NotFound,
    Conflict,
    Duplicate,
    CapacityFull,
    AlreadyEnrolled,
    SeminarNotOpen,
    AlreadyFinalized,
    PayloadTooLarge,
    ValidationFailed,
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 13] = [
        ErrorCode::BadRequest,
        ErrorCode::Unauthorized,
        ErrorCode::Forbidden,
        ErrorCode::NotFound,
        ErrorCode::Conflict,
        ErrorCode::Duplicate,
        ErrorCode::CapacityFull,
        ErrorCode::AlreadyEnrolled,
        ErrorCode::SeminarNotOpen,
        ErrorCode::AlreadyFinalized,
        ErrorCode::PayloadTooLarge,
        ErrorCode::ValidationFailed,
        ErrorCode::Internal,
    ];

    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::Unauthorized => StatusCode::UNAUTHORIZED,
            ErrorCode::Forbidden => StatusCode::FORBIDDEN,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Conflict
            | ErrorCode::Duplicate
            | ErrorCode::CapacityFull
            | ErrorCode::AlreadyEnrolled
            | ErrorCode::SeminarNotOpen
            | ErrorCode::AlreadyFinalized => StatusCode::CONFLICT,
            ErrorCode::PayloadTooLarge => StatusCode::PAYLOAD_TOO_LARGE,
            ErrorCode::ValidationFailed => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Error body: `{"code": ..., "message": ..., "details": [...]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default)]
    pub details: Vec<Violation>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        ApiError {
            code,
            message: message.into(),
            details: Vec::new(),
        }
    }

    pub fn unauthorized() -> Self {
        ApiError::new(ErrorCode::Unauthorized, "sign in required")
    }

    pub fn forbidden() -> Self {
        ApiError::new(ErrorCode::Forbidden, "not allowed for this account")
    }

    pub fn not_found(what: &str) -> Self {
        ApiError::new(ErrorCode::NotFound, format!("{what} not found"))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(ErrorCode::BadRequest, message)
    }

    pub fn internal() -> Self {
        ApiError::new(ErrorCode::Internal, "internal error")
    }

    pub fn validation(details: Vec<Violation>) -> Self {
        ApiError {
            code: ErrorCode::ValidationFailed,
            message: "validation failed".into(),
            details,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::NotFound { .. } => ApiError::new(ErrorCode::NotFound, message),
            StoreError::Refused(Refusal::CapacityFull) => ApiError::new(ErrorCode::CapacityFull, "seminar is full"),
            StoreError::Refused(Refusal::AlreadyEnrolled) => {
                ApiError::new(ErrorCode::AlreadyEnrolled, "already enrolled in this seminar")
            }
            StoreError::Refused(Refusal::SeminarNotOpen) => {
                ApiError::new(ErrorCode::SeminarNotOpen, "seminar is not open for enrollment")
            }
            StoreError::Validation(details) => ApiError::validation(details),
            StoreError::Duplicate { field } => ApiError {
                code: ErrorCode::Duplicate,
                message,
                details: vec![Violation::new(field, "duplicate", format!("{field} is already taken"))],
            },
            StoreError::AlreadyFinalized | StoreError::SeminarFinalized => {
                ApiError::new(ErrorCode::AlreadyFinalized, message)
            }
            StoreError::TitleCollision { .. } | StoreError::Conflict(_) | StoreError::HasDependents { .. } => {
                ApiError::new(ErrorCode::Conflict, message)
            }
            StoreError::TooLarge { .. } => ApiError::new(ErrorCode::PayloadTooLarge, message),
            StoreError::InvalidCredentials => ApiError::new(ErrorCode::Unauthorized, message),
            StoreError::Domain(_) => ApiError::new(ErrorCode::ValidationFailed, message),
            StoreError::SchemaMismatch { .. }
            | StoreError::AlreadyExists(_)
            | StoreError::Corrupt(_)
            | StoreError::Import { .. }
            | StoreError::Password(_)
            | StoreError::Sqlite(_)
            | StoreError::Io(_) => {
                tracing::error!(error = %message, "request failed");
                ApiError::internal()
            }
        }
    }
}

impl From<CertificateError> for ApiError {
    fn from(e: CertificateError) -> Self {
        match e {
            CertificateError::NotCompleted { .. } => {
                ApiError::new(ErrorCode::NotFound, "no successful completion recorded for this seminar")
            }
            CertificateError::Store(e) => e.into(),
            other => {
                tracing::error!(error = %other, "certificate rendering failed");
                ApiError::internal()
            }
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        match r {
            JsonRejection::JsonDataError(e) => ApiError::new(ErrorCode::ValidationFailed, e.body_text()),
            other => ApiError::bad_request(other.body_text()),
        }
    }
}

impl From<PathRejection> for ApiError {
    fn from(r: PathRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl From<MultipartError> for ApiError {
    fn from(e: MultipartError) -> Self {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            ApiError::new(ErrorCode::PayloadTooLarge, e.body_text())
        } else {
            ApiError::bad_request(e.body_text())
        }
    }
}
