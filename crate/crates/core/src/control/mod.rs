//! Multi-operator resource sharing: inventory, leases, per-port
//! delegation contexts, capability-checked configuration, an audit log that
//! replays to the same state, and a JSON-lines request protocol.

mod state;
mod wire;

pub use state::{
    AuditRecord, Command, ComputeCapacity, ControlPlane, DelegationContext, Inventory, Lease, LeaseState,
    OperatorSession, Outcome, Resource, Verb,
};
pub use wire::{handle_request, serve_stream, ControlPlaneService, ErrorBody, Request, Response, ServiceHandle};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ErrorCode {
    Auth,
    Denied,
    Conflict,
    Invalid,
    NotFound,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Auth => "AUTH",
            ErrorCode::Denied => "DENIED",
            ErrorCode::Conflict => "CONFLICT",
            ErrorCode::Invalid => "INVALID",
            ErrorCode::NotFound => "NOTFOUND",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[error("{}: {detail}", code.as_str())]
pub struct ControlError {
    pub code: ErrorCode,
    pub detail: String,
}

impl ControlError {
    pub fn new(code: ErrorCode, detail: impl Into<String>) -> Self {
        Self { code, detail: detail.into() }
    }
}

pub(crate) fn err<T>(code: ErrorCode, detail: impl Into<String>) -> Result<T, ControlError> {
    Err(ControlError::new(code, detail))
}
