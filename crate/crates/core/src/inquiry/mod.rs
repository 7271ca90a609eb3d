//! Structured symptom inquiry against a case record.
//!
//! The deterministic oracle ([`answer_inquiry`]) is the source of truth. An
//! optional language-model adapter ([`model_answer`]) can answer the same
//! question from a rendered prompt; [`reconcile_with_oracle`] compares the two.

mod adapter;
mod oracle;
mod prompt;
mod questions;
mod reconcile;

pub use adapter::{
    model_answer, parse_model_reply, AdapterConfig, AdapterError, ChatCompletionsBackend, CompletionBackend,
    ModelAdapter, ParseError, TransportError,
};
pub use oracle::{answer_inquiry, evaluate_symptom, extract_terms, Lexicon, LexiconEntry};
pub use prompt::{render_case_prompt, RenderedPrompt, CASE_DATA_HEADER, QA_GUIDELINES};
pub use questions::{instantiate_prompting_question, template_cell, MissingSlot, Slot, SlotBindings};
pub use reconcile::{reconcile_with_oracle, ConsistencyReport, Disagreement};

use serde::{Deserialize, Serialize};

/// Fixed reply when a question names no recognizable symptom.
pub const CLARIFICATION: &str = "Could you please specify the symptom you are inquiring about?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Present,
    Denied,
    NotInRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymptomVerdict {
    pub term: String,
    pub verdict: Verdict,
    /// Finding details for `Present`, the denial sentence for `Denied`,
    /// empty for `NotInRecord`.
    pub details: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InquiryResponse {
    pub verdicts: Vec<SymptomVerdict>,
    pub needs_clarification: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clarification_text: Option<String>,
}

impl InquiryResponse {
    pub fn clarification() -> Self {
        Self { verdicts: Vec::new(), needs_clarification: true, clarification_text: Some(CLARIFICATION.to_owned()) }
    }

    pub fn with_verdicts(verdicts: Vec<SymptomVerdict>) -> Self {
        if verdicts.is_empty() {
            return Self::clarification();
        }
        Self { verdicts, needs_clarification: false, clarification_text: None }
    }
}

/// Denial sentence used for `Denied` verdicts.
pub fn denial_sentence(term: &str) -> String {
    format!("Patient denies {term}.")
}
