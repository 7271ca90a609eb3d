//! Core engine for a problem-based clinical reasoning trainer.
//!
//! The crate is organised around the learner workflow:
//!
//! - [`case`]: structured case records, validation, taxonomy navigation and search.
//! - [`difficulty`]: three-dimension difficulty classification of cases.
//! - [`inquiry`]: the symptom-inquiry oracle, prompt rendering, prompting
//!   questions and the optional language-model adapter.
//! - [`session`]: the event-sourced per-learner analysis state machine.
//! - [`reporting`]: clinical-reasoning-cycle reports, rubric aggregation and
//!   session export bundles.

pub mod case;
pub mod clock;
pub mod difficulty;
pub mod inquiry;
pub mod reporting;
pub mod session;
pub mod text;

pub use case::{CaseRecord, Corpus};
pub use clock::{Clock, FixedStepClock, SystemClock, Timestamp};
pub use session::{Session, SessionError};
