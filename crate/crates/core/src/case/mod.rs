//! Structured clinical cases: the record types, the on-disk document schema,
//! invariant checking, taxonomy navigation and keyword search.

mod corpus;
mod schema;
mod validate;

use serde::{Deserialize, Serialize};

pub use corpus::{
    parse_manifest, CaseSummary, Corpus, CorpusError, Manifest, SearchHit, TaxonomyListing, TaxonomyNode, MANIFEST_FILE,
};
pub use schema::{parse_case, serialize_case, CaseDocument, PacketDoc};
pub use validate::{validate_case, ValidationReport, Violation};

/// Whether the patient reports or denies a finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Present,
    Denied,
}

/// When a finding becomes visible to the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepVisibility {
    /// Part of the presenting information.
    Initial,
    /// Only surfaced when the learner asks about it.
    OnInquiryOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub term: String,
    pub synonyms: Vec<String>,
    pub polarity: Polarity,
    pub details: String,
    pub step_visibility: StepVisibility,
}

impl Finding {
    /// Normalized canonical term used for matching.
    pub fn canonical(&self) -> String {
        crate::text::normalize(&self.term)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LabValue {
    Numeric(f64),
    Categorical(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NormalRange {
    /// Closed interval in the result's unit.
    Interval { lo: f64, hi: f64 },
    Expected(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabResult {
    pub item: String,
    pub value: LabValue,
    pub unit: String,
    pub normal_range: NormalRange,
}

/// Relative path to an image plus the SHA-256 of its bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRef {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PacketKind {
    ExamText,
    ImagingStudy,
    LabPanel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PacketBody {
    ExamText { text: String },
    ImagingStudy { image: ImageRef, report: String },
    LabPanel { labs: Vec<LabResult> },
}

/// A staged unit of additional clinical data revealed during analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "schema::PacketDoc")]
pub struct EvidencePacket {
    pub id: String,
    pub title: String,
    pub reveal_order: u32,
    pub body: PacketBody,
}

impl EvidencePacket {
    pub fn kind(&self) -> PacketKind {
        match self.body {
            PacketBody::ExamText { .. } => PacketKind::ExamText,
            PacketBody::ImagingStudy { .. } => PacketKind::ImagingStudy,
            PacketBody::LabPanel { .. } => PacketKind::LabPanel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundTruth {
    pub diagnosis: String,
    pub treatment: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassicRelevance {
    DirectlyRelated,
    SomewhatRelated,
    NotRelated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifficultyAttributes {
    /// Cases per 100,000 population per year.
    pub incidence_per_100k: f64,
    /// Authored number of reasoning steps.
    pub chain_length: u32,
    pub classic_relevance: ClassicRelevance,
}

/// A complete structured case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CaseDocument", into = "CaseDocument")]
pub struct CaseRecord {
    pub id: String,
    pub taxonomy_path: Vec<String>,
    pub description: String,
    pub initial_narrative: String,
    pub findings: Vec<Finding>,
    pub packets: Vec<EvidencePacket>,
    pub prognosis: String,
    pub ground_truth: GroundTruth,
    pub difficulty: DifficultyAttributes,
}

/// Ids become file names and URL segments.
pub fn is_safe_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl CaseRecord {
    /// Packets sorted by reveal order.
    pub fn packets_in_reveal_order(&self) -> Vec<&EvidencePacket> {
        let mut packets: Vec<_> = self.packets.iter().collect();
        packets.sort_by_key(|p| (p.reveal_order, p.id.clone()));
        packets
    }

    pub fn packet(&self, id: &str) -> Option<&EvidencePacket> {
        self.packets.iter().find(|p| p.id == id)
    }

    /// The finding whose normalized term equals `canonical`.
    pub fn finding(&self, canonical: &str) -> Option<&Finding> {
        self.findings.iter().find(|f| f.canonical() == canonical)
    }
}

/// Errors raised while decoding a case document.
#[derive(Debug, thiserror::Error)]
pub enum CaseError {
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("case violates {} constraint(s): {}", .0.len(), render_violations(.0))]
    Value(Vec<Violation>),
}

fn render_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}
