use std::path::PathBuf;

use clinreason_core::case::CorpusError;
use clinreason_core::inquiry::AdapterError;
use clinreason_core::reporting::ScoreError;
use clinreason_core::SessionError;
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("session `{session}` cannot be replayed at seq {seq}: {message}")]
    Replay { session: String, seq: u64, message: String },
    #[error("storage error on {path}: {source}")]
    Storage { path: PathBuf, source: std::io::Error },
    #[error("{0} not found")]
    NotFound(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("the model adapter is disabled (oracle-only mode)")]
    OracleOnly,
    #[error("model request failed: {0}")]
    Model(#[from] AdapterError),
    #[error("case `{0}` is used by existing sessions and cannot be changed")]
    CaseInUse(String),
    #[error("invalid request: {0}")]
    BadRequest(String),
}

impl StoreError {
    pub(crate) fn storage(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> StoreError {
        let path = path.into();
        move |source| StoreError::Storage { path, source }
    }

    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::Corpus(CorpusError::NotFound { .. }) => "NotFound",
            StoreError::Corpus(_) => "CorpusError",
            StoreError::Replay { .. } => "ReplayError",
            StoreError::Storage { .. } => "StorageError",
            StoreError::NotFound(_) => "NotFound",
            StoreError::Session(e) => match e {
                SessionError::NotFound(_) => "NotFound",
                SessionError::PreconditionFailed(_) => "PreconditionFailed",
                SessionError::InvalidTransition => "InvalidTransition",
                SessionError::Exhausted => "Exhausted",
                SessionError::NoOpMove => "NoOpMove",
                SessionError::UnknownFactor(_) => "UnknownFactor",
                SessionError::NotRevealed(_) => "NotRevealed",
                SessionError::WrongKind(_) => "WrongKind",
                SessionError::GeometryError(_) => "GeometryError",
                SessionError::WrongStep => "WrongStep",
                SessionError::InvalidResponse(_) => "InvalidResponse",
                SessionError::InvalidScore(_) => "InvalidScore",
                SessionError::SequenceGap { .. }
                | SessionError::StaleTimestamp { .. }
                | SessionError::CaseMismatch { .. }
                | SessionError::NotStarted => "ReplayError",
            },
            StoreError::Score(ScoreError::NoSheets) => "NotFound",
            StoreError::Score(ScoreError::Parse { .. }) => "BadRequest",
            StoreError::Score(_) => "InvalidScore",
            StoreError::OracleOnly => "OracleOnly",
            StoreError::Model(AdapterError::Disabled) => "OracleOnly",
            StoreError::Model(AdapterError::Transport(_)) => "ModelUnavailable",
            StoreError::Model(AdapterError::Parse(_)) => "ParseError",
            StoreError::CaseInUse(_) => "CaseInUse",
            StoreError::BadRequest(_) => "BadRequest",
        }
    }

    /// Extra structured context for API clients.
    pub fn detail(&self) -> Value {
        match self {
            StoreError::Model(AdapterError::Parse(e)) => json!({ "reason": e.reason, "reply": e.reply }),
            StoreError::Replay { session, seq, .. } => json!({ "session": session, "seq": seq }),
            StoreError::Corpus(CorpusError::Case { case, source: clinreason_core::case::CaseError::Value(v) }) => {
                json!({ "case": case, "violations": v })
            }
            StoreError::Corpus(CorpusError::Case { case, .. }) => json!({ "case": case }),
            StoreError::Corpus(CorpusError::NotFound { segment, index }) => json!({ "segment": segment, "index": index }),
            StoreError::Session(SessionError::InvalidScore(ScoreError::InvalidScore { rater_id, criterion, .. }))
            | StoreError::Score(ScoreError::InvalidScore { rater_id, criterion, .. }) => {
                json!({ "rater_id": rater_id, "criterion": criterion })
            }
            _ => Value::Null,
        }
    }
}
