//! Per-learner analysis session for problem formulation, diagnostic analysis
//! and prognosis reflection.
//!
//! A session is event-sourced: every mutation is an [`ActionRecord`] applied
//! by [`Session::apply`], and [`Session::replay`] rebuilds the same state from
//! the log.

mod engine;
mod labs;
mod log;
mod model;
mod prompts;

pub use engine::Outcome;
pub use labs::{flag_labs, LabFlag, LabStatus};
pub use log::{decode_log, encode_log, encode_record, LogError};
pub use model::*;
pub use prompts::{current_prompts, slot_bindings};

use crate::reporting::ScoreError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("session is already at the final step")]
    InvalidTransition,
    #[error("all evidence has been revealed")]
    Exhausted,
    #[error("entry is already in that category")]
    NoOpMove,
    #[error("unknown mind-map factor `{0}`")]
    UnknownFactor(String),
    #[error("packet `{0}` has not been revealed")]
    NotRevealed(String),
    #[error("packet `{0}` has the wrong kind for this operation")]
    WrongKind(String),
    #[error("invalid annotation geometry: {0}")]
    GeometryError(String),
    #[error("report requires the prognosis reflection step")]
    WrongStep,
    #[error("malformed inquiry response: {0}")]
    InvalidResponse(String),
    #[error(transparent)]
    InvalidScore(#[from] ScoreError),
    #[error("expected sequence number {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("timestamp {got} precedes the last update at {last}")]
    StaleTimestamp { last: i64, got: i64 },
    #[error("record belongs to case `{got}`, session is for `{expected}`")]
    CaseMismatch { expected: String, got: String },
    #[error("session log must begin with a start record")]
    NotStarted,
}
