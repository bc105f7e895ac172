use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use serde::Serialize;

use trapnet_core::analytics::AnalyticsError;
use trapnet_core::dsp::DspError;
use trapnet_core::ingest::{FilenameError, IngestError};
use trapnet_core::store::StoreError;
use trapnet_core::synth::SynthError;

/// Error body: `{"error": code, "field": name or null, "message": text}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
    pub field: Option<String>,
    pub message: String,
}

impl ApiError {
    pub fn new(status: u16, error: &str, field: Option<&str>, message: impl Into<String>) -> Self {
        ApiError { status, error: error.into(), field: field.map(str::to_string), message: message.into() }
    }

    pub fn bad_param(field: &str, message: impl Into<String>) -> Self {
        ApiError::new(400, "invalid_parameter", Some(field), message)
    }

    pub fn missing(field: &str) -> Self {
        ApiError::new(400, "missing_parameter", Some(field), format!("parameter {field:?} is required"))
    }

    pub fn not_found(what: &str, message: impl Into<String>) -> Self {
        ApiError::new(404, "not_found", Some(what), message)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.error, self.message)
    }
}

impl std::error::Error for ApiError {}

impl From<AnalyticsError> for ApiError {
    fn from(e: AnalyticsError) -> Self {
        let field = match &e {
            AnalyticsError::InsufficientData { .. } => Some("hours"),
            _ => None,
        };
        ApiError::new(400, e.code(), field, e.to_string())
    }
}

impl From<DspError> for ApiError {
    fn from(e: DspError) -> Self {
        ApiError::new(400, e.code(), None, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match &e {
            StoreError::UnknownDevice(_) => ApiError::new(404, "unknown_device", Some("device"), e.to_string()),
            StoreError::UnknownRecording(_) => ApiError::new(404, "unknown_recording", Some("id"), e.to_string()),
            StoreError::KindConflict { .. } => ApiError::new(400, "kind_conflict", Some("device"), e.to_string()),
            StoreError::InvalidFilter(_) => ApiError::new(400, "invalid_filter", None, e.to_string()),
            StoreError::StorageFailure(_) | StoreError::CorruptLog { .. } => {
                ApiError::new(500, "storage_failure", None, e.to_string())
            }
        }
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        ApiError::new(400, "missing_header", None, e.to_string())
    }
}

impl From<FilenameError> for ApiError {
    fn from(e: FilenameError) -> Self {
        ApiError::new(400, "invalid_filename", Some("file"), e.to_string())
    }
}

impl From<SynthError> for ApiError {
    fn from(e: SynthError) -> Self {
        ApiError::new(400, "invalid_config", None, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = trapnet_core::canonical_json(&self).unwrap_or_else(|_| "{}".into());
        (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}
