//! Request and response bodies of the conductor HTTP API.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::conductor::{ConductorError, Outbound, Phase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageBody {
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApproveBody {
    pub by: Option<String>,
    /// Marks auto-approve mode in the approval record.
    pub synthetic: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RejectBody {
    pub by: Option<String>,
    pub reason: Option<String>,
}

/// An outbound conductor message with its position in the session stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    /// Starts at 1 and increases by one per event.
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub event: Outbound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsPage {
    pub events: Vec<SessionEvent>,
    pub phase: Phase,
    /// Pass as `after` to continue the stream.
    pub next: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionListing {
    pub id: String,
    pub phase: Phase,
    pub query: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub skill_config: String,
    pub skill_fingerprint: String,
    pub extractor: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    IllegalAction,
    UnknownSession,
    NotFound,
    BadRequest,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
}

impl From<&ConductorError> for ApiError {
    fn from(e: &ConductorError) -> Self {
        let (kind, phase) = match e {
            ConductorError::IllegalAction { phase, .. } => (ErrorKind::IllegalAction, Some(*phase)),
            ConductorError::UnknownSession(_) => (ErrorKind::UnknownSession, None),
            ConductorError::Journal(_) => (ErrorKind::Internal, None),
        };
        ApiError {
            kind,
            message: e.to_string(),
            phase,
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for ApiError {}
