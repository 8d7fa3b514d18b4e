use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use coopkb_core::protocol::{AdmissionResult, Outcome};
use coopkb_core::query::QueryError;
use coopkb_core::KbError;
use serde::{Deserialize, Serialize};

/// Body of every response. `data` is absent on plain errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub position: u64,
    #[serde(default = "none", skip_serializing_if = "Option::is_none")]
    pub data: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

fn none<T>() -> Option<T> {
    None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub data: Option<serde_json::Value>,
    pub position: u64,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            data: None,
            position: 0,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn at(mut self, position: u64) -> Self {
        self.position = position;
        self
    }

    pub fn kb(e: &KbError) -> Self {
        use KbError::*;
        let (status, code) = match e {
            BadIdentifier(_) => (StatusCode::BAD_REQUEST, "bad_identifier"),
            InvalidPayload(_) => (StatusCode::BAD_REQUEST, "invalid_payload"),
            InvalidGraph(_) => (StatusCode::BAD_REQUEST, "invalid_graph"),
            OutOfRange(_) => (StatusCode::BAD_REQUEST, "out_of_range"),
            UnknownUser(_) => (StatusCode::NOT_FOUND, "unknown_user"),
            UnknownObject(_) => (StatusCode::NOT_FOUND, "unknown_object"),
            UnknownRelationType(_) => (StatusCode::NOT_FOUND, "unknown_relation_type"),
            DanglingConnection(_) => (StatusCode::NOT_FOUND, "dangling_connection"),
            DuplicateUser(_) => (StatusCode::CONFLICT, "duplicate_user"),
            DuplicateId(_) => (StatusCode::CONFLICT, "duplicate_id"),
            NoAttachment(_) => (StatusCode::UNPROCESSABLE_ENTITY, "no_attachment"),
            CycleDetected { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "cycle_detected"),
            SignatureViolation { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "signature_violation"),
            Journal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "journal"),
        };
        ApiError::new(status, code, e.to_string())
    }

    pub fn query(e: &QueryError) -> Self {
        match e {
            QueryError::Usage(m) => ApiError::new(StatusCode::BAD_REQUEST, "usage", m.clone()),
            QueryError::Kb(k) => ApiError::kb(k),
        }
    }

    /// 422 for a proposal the protocol turned down.
    pub fn rejected(r: &AdmissionResult) -> Self {
        let code = match r.outcome {
            Outcome::NeedsConnection => "needs_connection",
            _ => "conflict_detected",
        };
        ApiError {
            data: Some(serde_json::to_value(r).expect("serializable")),
            ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, r.required_action.clone())
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Envelope {
            position: self.position,
            data: self.data,
            error: Some(ErrorBody {
                code: self.code.to_string(),
                message: self.message,
            }),
        };
        (self.status, Json(body)).into_response()
    }
}
