use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::inquiry::InquiryResponse;
use crate::reporting::{CaseReport, CrcStep, RaterSheet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Step {
    ProblemFormulation,
    DiagnosisAnalysis,
    PrognosisReflection,
}

impl Step {
    pub const ALL: [Step; 3] = [Step::ProblemFormulation, Step::DiagnosisAnalysis, Step::PrognosisReflection];

    pub fn next(self) -> Option<Step> {
        match self {
            Step::ProblemFormulation => Some(Step::DiagnosisAnalysis),
            Step::DiagnosisAnalysis => Some(Step::PrognosisReflection),
            Step::PrognosisReflection => None,
        }
    }
}

/// Facts, Ideas, Learning Issues and Action Plans.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FilaFactor {
    Facts,
    Ideas,
    LearningIssues,
    ActionPlans,
}

impl FilaFactor {
    pub const ALL: [FilaFactor; 4] = [FilaFactor::Facts, FilaFactor::Ideas, FilaFactor::LearningIssues, FilaFactor::ActionPlans];

    pub fn parse(s: &str) -> Option<FilaFactor> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match key.as_str() {
            "facts" => Some(FilaFactor::Facts),
            "ideas" => Some(FilaFactor::Ideas),
            "learningissues" => Some(FilaFactor::LearningIssues),
            "actionplans" | "actionplan" => Some(FilaFactor::ActionPlans),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Learner,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InquirySource {
    Oracle,
    Model,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub timestamp: Timestamp,
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<InquiryResponse>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DiagnosisCategory {
    MostLikely,
    NeedToRuleOut,
    NotLikely,
}

impl DiagnosisCategory {
    pub const ALL: [DiagnosisCategory; 3] =
        [DiagnosisCategory::MostLikely, DiagnosisCategory::NeedToRuleOut, DiagnosisCategory::NotLikely];
}

/// Something a diagnosis or mind-map node can cite.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EvidenceRef {
    Transcript { index: usize },
    Finding { term: String },
    Packet { id: String },
}

impl std::fmt::Display for EvidenceRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EvidenceRef::Transcript { index } => write!(f, "transcript#{index}"),
            EvidenceRef::Finding { term } => write!(f, "finding:{term}"),
            EvidenceRef::Packet { id } => write!(f, "packet:{id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryEvent {
    Created,
    Moved,
    EvidenceAttached,
    Removed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub timestamp: Timestamp,
    pub event: HistoryEvent,
    pub category: DiagnosisCategory,
    pub note: String,
    /// Made after the ground truth was shown.
    #[serde(default)]
    pub post_reveal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosisEntry {
    pub id: String,
    pub label: String,
    pub category: DiagnosisCategory,
    pub rationale: String,
    pub evidence_refs: Vec<EvidenceRef>,
    pub history: Vec<HistoryRecord>,
    /// Tombstone; removed entries stay for review.
    #[serde(default)]
    pub removed: bool,
}

impl DiagnosisEntry {
    /// Category at time `at`, reconstructed from the history.
    pub fn category_at(&self, at: Timestamp) -> Option<DiagnosisCategory> {
        self.history.iter().take_while(|h| h.timestamp <= at).last().map(|h| h.category)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEdit {
    pub timestamp: Timestamp,
    pub step: Step,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MindMapNode {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_ref: Option<EvidenceRef>,
    pub created_at_step: Step,
    pub edit_history: Vec<NodeEdit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MindMap {
    pub branches: BTreeMap<FilaFactor, Vec<MindMapNode>>,
}

impl Default for MindMap {
    fn default() -> Self {
        Self { branches: FilaFactor::ALL.into_iter().map(|f| (f, Vec::new())).collect() }
    }
}

impl MindMap {
    pub fn branch(&self, factor: FilaFactor) -> &[MindMapNode] {
        self.branches.get(&factor).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn find(&self, id: &str) -> Option<(FilaFactor, usize)> {
        self.branches
            .iter()
            .find_map(|(f, nodes)| nodes.iter().position(|n| n.id == id).map(|i| (*f, i)))
    }

    pub fn is_empty(&self) -> bool {
        self.branches.values().all(Vec::is_empty)
    }
}

/// Normalized image coordinates in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Rectangle { x: f64, y: f64, w: f64, h: f64 },
    Polyline { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub packet_id: String,
    pub shape: Shape,
    pub label: String,
    #[serde(default)]
    pub note: String,
}

impl Annotation {
    pub fn check_geometry(&self) -> Result<(), String> {
        let unit = |name: &str, v: f64| {
            if v.is_finite() && (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} = {v} is outside [0, 1]"))
            }
        };
        match &self.shape {
            Shape::Rectangle { x, y, w, h } => {
                unit("x", *x)?;
                unit("y", *y)?;
                unit("w", *w)?;
                unit("h", *h)?;
                unit("x + w", x + w)?;
                unit("y + h", y + h)
            }
            Shape::Polyline { points } => {
                if points.len() < 2 {
                    return Err("polyline needs at least 2 points".into());
                }
                points.iter().try_for_each(|[x, y]| unit("x", *x).and(unit("y", *y)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DiagnosisAction {
    Add { label: String, category: DiagnosisCategory, rationale: String },
    Move { entry: String, new_category: DiagnosisCategory, note: String },
    AttachEvidence { entry: String, reference: EvidenceRef },
    Remove { entry: String, note: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MindMapAction {
    AddNode {
        factor: FilaFactor,
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source_ref: Option<EvidenceRef>,
    },
    EditNode { id: String, text: String },
    RemoveNode { id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", content = "payload", rename_all = "snake_case")]
pub enum Action {
    Start { session_id: String, case_id: String },
    Inquiry { text: String, source: InquirySource, response: InquiryResponse },
    Advance,
    RequestEvidence,
    Diagnosis(DiagnosisAction),
    Mindmap(MindMapAction),
    Annotate(Annotation),
    GenerateReport,
    EditReport { section: CrcStep, text: String },
    SubmitScores(RaterSheet),
}

/// One line of the append-only session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub seq: u64,
    pub timestamp: Timestamp,
    pub actor: String,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub case_id: String,
    pub step: Step,
    pub transcript: Vec<TranscriptEntry>,
    pub diagnosis_list: Vec<DiagnosisEntry>,
    pub mind_map: MindMap,
    pub annotations: Vec<Annotation>,
    pub revealed_packet_ids: Vec<String>,
    pub created_at: Timestamp,
    pub updated_at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<CaseReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rater_sheets: Vec<RaterSheet>,
    /// Sequence number the next log record must carry.
    pub next_seq: u64,
    pub next_entry: u64,
    pub next_node: u64,
}

impl Session {
    pub fn entry(&self, id: &str) -> Option<&DiagnosisEntry> {
        self.diagnosis_list.iter().find(|e| e.id == id)
    }

    /// Live (non-removed) entries in a category, creation order.
    pub fn entries_in(&self, category: DiagnosisCategory) -> impl Iterator<Item = &DiagnosisEntry> {
        self.diagnosis_list.iter().filter(move |e| !e.removed && e.category == category)
    }

    pub fn is_revealed(&self, packet_id: &str) -> bool {
        self.revealed_packet_ids.iter().any(|p| p == packet_id)
    }

    /// Canonical JSON snapshot.
    pub fn snapshot_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sessions serialize")
    }
}
