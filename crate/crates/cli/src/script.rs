//! Simulation scripts: a case id plus an ordered list of learner actions with
//! embedded expectations, run headlessly against a [`Store`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use clinreason_core::inquiry::Verdict;
use clinreason_core::reporting::CrcStep;
use clinreason_core::session::{
    Action, Annotation, DiagnosisAction, DiagnosisCategory, EvidenceRef, FilaFactor, MindMapAction, Outcome, Shape,
    Step,
};
use clinreason_core::{Session, SessionError};
use clinreason_service::api::ACTOR;
use clinreason_service::{Store, StoreError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationScript {
    pub case_id: String,
    #[serde(default)]
    pub steps: Vec<ScriptStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    #[serde(flatten)]
    pub op: Op,
    /// Error code the step must fail with; the step then changes nothing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Op {
    Inquire {
        text: String,
        /// Expected verdict per canonical term.
        #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
        expect: BTreeMap<String, Verdict>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_clarification: Option<bool>,
    },
    AddDiagnosis {
        name: String,
        label: String,
        category: DiagnosisCategory,
        #[serde(default)]
        rationale: String,
    },
    MoveDiagnosis {
        diagnosis: String,
        category: DiagnosisCategory,
        #[serde(default)]
        note: String,
    },
    AttachEvidence {
        diagnosis: String,
        reference: EvidenceRef,
    },
    RemoveDiagnosis {
        diagnosis: String,
        #[serde(default)]
        note: String,
    },
    AddNode {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        factor: String,
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source_ref: Option<EvidenceRef>,
    },
    EditNode {
        node: String,
        text: String,
    },
    RemoveNode {
        node: String,
    },
    Advance,
    RequestEvidence {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        expect_packet: Option<String>,
    },
    Annotate {
        packet: String,
        shape: Shape,
        label: String,
        #[serde(default)]
        note: String,
    },
    GenerateReport,
    EditReport {
        section: CrcStep,
        text: String,
    },
    Expect(Expectation),
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Inquire { .. } => "inquire",
            Op::AddDiagnosis { .. } => "add_diagnosis",
            Op::MoveDiagnosis { .. } => "move_diagnosis",
            Op::AttachEvidence { .. } => "attach_evidence",
            Op::RemoveDiagnosis { .. } => "remove_diagnosis",
            Op::AddNode { .. } => "add_node",
            Op::EditNode { .. } => "edit_node",
            Op::RemoveNode { .. } => "remove_node",
            Op::Advance => "advance",
            Op::RequestEvidence { .. } => "request_evidence",
            Op::Annotate { .. } => "annotate",
            Op::GenerateReport => "generate_report",
            Op::EditReport { .. } => "edit_report",
            Op::Expect(_) => "expect",
        }
    }

    fn defines(&self) -> Option<(NameKind, &str)> {
        match self {
            Op::AddDiagnosis { name, .. } => Some((NameKind::Diagnosis, name)),
            Op::AddNode { name: Some(name), .. } => Some((NameKind::Node, name)),
            _ => None,
        }
    }

    fn references(&self) -> Vec<(NameKind, &str)> {
        match self {
            Op::MoveDiagnosis { diagnosis, .. }
            | Op::AttachEvidence { diagnosis, .. }
            | Op::RemoveDiagnosis { diagnosis, .. } => vec![(NameKind::Diagnosis, diagnosis)],
            Op::EditNode { node, .. } | Op::RemoveNode { node } => vec![(NameKind::Node, node)],
            Op::Expect(e) => e
                .diagnoses
                .keys()
                .chain(e.evidence.keys())
                .chain(&e.removed)
                .map(|n| (NameKind::Diagnosis, n.as_str()))
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// State assertions checked against the live session.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<Step>,
    /// Category per diagnosis name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnoses: BTreeMap<String, DiagnosisCategory>,
    /// References each named diagnosis must cite.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub evidence: BTreeMap<String, Vec<EvidenceRef>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed: Vec<String>,
    /// Exact revealed packet ids, in order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revealed: Option<Vec<String>>,
    /// Text each report section must contain.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub report_contains: BTreeMap<CrcStep, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum NameKind {
    Diagnosis,
    Node,
}

impl fmt::Display for NameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NameKind::Diagnosis => "diagnosis",
            NameKind::Node => "node",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("malformed script at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("seq {seq}: {kind} `{name}` is used before it is defined")]
    Undefined { seq: usize, kind: String, name: String },
    #[error("seq {seq}: {kind} `{name}` is already defined")]
    Duplicate { seq: usize, kind: String, name: String },
}

/// Parses a script and checks that every name is defined by an earlier step.
pub fn parse_script(text: &str) -> Result<SimulationScript, ScriptError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let script: SimulationScript = serde_path_to_error::deserialize(de)
        .map_err(|e| ScriptError::Parse { path: e.path().to_string(), message: e.inner().to_string() })?;
    check_names(&script)?;
    Ok(script)
}

fn check_names(script: &SimulationScript) -> Result<(), ScriptError> {
    let mut defined: HashSet<(NameKind, &str)> = HashSet::new();
    for (seq, step) in script.steps.iter().enumerate() {
        for (kind, name) in step.op.references() {
            if !defined.contains(&(kind, name)) {
                return Err(ScriptError::Undefined { seq, kind: kind.to_string(), name: name.into() });
            }
        }
        if let Some((kind, name)) = step.op.defines() {
            if step.expect_error.is_none() && !defined.insert((kind, name)) {
                return Err(ScriptError::Duplicate { seq, kind: kind.to_string(), name: name.into() });
            }
        }
    }
    Ok(())
}

/// Why a run stopped early.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// The session could not be created; nothing was run.
    #[error(transparent)]
    Setup(StoreError),
    #[error("seq {seq} ({op}): expected {expected}, got {actual}")]
    Expectation { seq: usize, op: &'static str, expected: String, actual: String, session_id: String },
    #[error("seq {seq} ({op}) failed: {source}")]
    Action { seq: usize, op: &'static str, source: StoreError, session_id: String },
}

impl RunError {
    pub fn session_id(&self) -> Option<&str> {
        match self {
            RunError::Setup(_) => None,
            RunError::Expectation { session_id, .. } | RunError::Action { session_id, .. } => Some(session_id),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepReport {
    pub seq: usize,
    pub op: &'static str,
    /// Error code when the step failed as expected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub session: Arc<Session>,
    pub steps: Vec<StepReport>,
}

struct Runner<'a> {
    store: &'a Store,
    session_id: String,
    diagnoses: HashMap<String, String>,
    nodes: HashMap<String, String>,
}

/// Runs `script` in a new session of `store`, stopping at the first failed
/// expectation or unexpected action error.
pub fn run_script(store: &Store, script: &SimulationScript) -> Result<RunReport, RunError> {
    let session = store.start_session(&script.case_id).map_err(RunError::Setup)?;
    let mut runner = Runner { store, session_id: session.id.clone(), diagnoses: HashMap::new(), nodes: HashMap::new() };
    let mut steps = Vec::with_capacity(script.steps.len());
    for (seq, step) in script.steps.iter().enumerate() {
        steps.push(runner.step(seq, step)?);
    }
    let session = store.session(&runner.session_id).map_err(RunError::Setup)?;
    Ok(RunReport { session, steps })
}

impl Runner<'_> {
    fn fail(&self, seq: usize, op: &'static str, expected: impl Into<String>, actual: impl Into<String>) -> RunError {
        RunError::Expectation {
            seq,
            op,
            expected: expected.into(),
            actual: actual.into(),
            session_id: self.session_id.clone(),
        }
    }

    fn step(&mut self, seq: usize, step: &ScriptStep) -> Result<StepReport, RunError> {
        let op = step.op.name();
        let result = self.execute(seq, &step.op);
        match (&step.expect_error, result) {
            (None, Ok(outcome)) => Ok(StepReport { seq, op, error: None, outcome }),
            (None, Err(Failure::Store(source))) => {
                Err(RunError::Action { seq, op, source, session_id: self.session_id.clone() })
            }
            (_, Err(Failure::Run(e))) => Err(e),
            (Some(code), Err(Failure::Store(e))) if e.code() == code => {
                Ok(StepReport { seq, op, error: Some(code.clone()), outcome: None })
            }
            (Some(code), Err(Failure::Store(e))) => Err(self.fail(seq, op, format!("error {code}"), format!("error {}: {e}", e.code()))),
            (Some(code), Ok(_)) => Err(self.fail(seq, op, format!("error {code}"), "success")),
        }
    }

    fn commit(&self, action: Action) -> Result<Outcome, Failure> {
        Ok(self.store.commit(&self.session_id, action, ACTOR)?.1)
    }

    fn resolve(map: &HashMap<String, String>, name: &str, kind: &str) -> Result<String, Failure> {
        map.get(name)
            .cloned()
            .ok_or_else(|| Failure::Store(StoreError::BadRequest(format!("{kind} `{name}` was never created"))))
    }

    fn execute(&mut self, seq: usize, op: &Op) -> Result<Option<Outcome>, Failure> {
        let name = op.name();
        let diagnosis = |d: &str, this: &Self| Self::resolve(&this.diagnoses, d, "diagnosis");
        let outcome = match op {
            Op::Inquire { text, expect, expect_clarification } => {
                let result = self.store.inquire(&self.session_id, text, false, ACTOR)?;
                let response = result.response;
                for (term, want) in expect {
                    let got = response.verdicts.iter().find(|v| &v.term == term).map(|v| v.verdict);
                    if got != Some(*want) {
                        let actual = got.map_or("no verdict".to_string(), |v| format!("{v:?}"));
                        return Err(self.fail(seq, name, format!("{term}: {want:?}"), format!("{term}: {actual}")).into());
                    }
                }
                if let Some(want) = expect_clarification {
                    if response.needs_clarification != *want {
                        return Err(self
                            .fail(seq, name, format!("clarification {want}"), format!("clarification {}", response.needs_clarification))
                            .into());
                    }
                }
                Outcome::Answered { response }
            }
            Op::AddDiagnosis { name: dx, label, category, rationale } => {
                let action = DiagnosisAction::Add { label: label.clone(), category: *category, rationale: rationale.clone() };
                let outcome = self.commit(Action::Diagnosis(action))?;
                if let Outcome::DiagnosisUpdated { entry_id } = &outcome {
                    self.diagnoses.insert(dx.clone(), entry_id.clone());
                }
                outcome
            }
            Op::MoveDiagnosis { diagnosis: dx, category, note } => {
                let entry = diagnosis(dx, self)?;
                self.commit(Action::Diagnosis(DiagnosisAction::Move { entry, new_category: *category, note: note.clone() }))?
            }
            Op::AttachEvidence { diagnosis: dx, reference } => {
                let entry = diagnosis(dx, self)?;
                self.commit(Action::Diagnosis(DiagnosisAction::AttachEvidence { entry, reference: reference.clone() }))?
            }
            Op::RemoveDiagnosis { diagnosis: dx, note } => {
                let entry = diagnosis(dx, self)?;
                self.commit(Action::Diagnosis(DiagnosisAction::Remove { entry, note: note.clone() }))?
            }
            Op::AddNode { name: node, factor, text, source_ref } => {
                let factor = FilaFactor::parse(factor).ok_or_else(|| SessionError::UnknownFactor(factor.clone()))
                    .map_err(StoreError::from)?;
                let action = MindMapAction::AddNode { factor, text: text.clone(), source_ref: source_ref.clone() };
                let outcome = self.commit(Action::Mindmap(action))?;
                if let (Some(node), Outcome::MindMapUpdated { node_id }) = (node, &outcome) {
                    self.nodes.insert(node.clone(), node_id.clone());
                }
                outcome
            }
            Op::EditNode { node, text } => {
                let id = Self::resolve(&self.nodes, node, "node")?;
                self.commit(Action::Mindmap(MindMapAction::EditNode { id, text: text.clone() }))?
            }
            Op::RemoveNode { node } => {
                let id = Self::resolve(&self.nodes, node, "node")?;
                self.commit(Action::Mindmap(MindMapAction::RemoveNode { id }))?
            }
            Op::Advance => self.commit(Action::Advance)?,
            Op::RequestEvidence { expect_packet } => {
                let outcome = self.commit(Action::RequestEvidence)?;
                if let (Some(want), Outcome::Revealed { packet_id }) = (expect_packet, &outcome) {
                    if want != packet_id {
                        return Err(self.fail(seq, name, format!("packet {want}"), format!("packet {packet_id}")).into());
                    }
                }
                outcome
            }
            Op::Annotate { packet, shape, label, note } => self.commit(Action::Annotate(Annotation {
                packet_id: packet.clone(),
                shape: shape.clone(),
                label: label.clone(),
                note: note.clone(),
            }))?,
            Op::GenerateReport => self.commit(Action::GenerateReport)?,
            Op::EditReport { section, text } => self.commit(Action::EditReport { section: *section, text: text.clone() })?,
            Op::Expect(e) => {
                self.check(seq, e)?;
                return Ok(None);
            }
        };
        Ok(Some(outcome))
    }

    fn check(&self, seq: usize, e: &Expectation) -> Result<(), Failure> {
        let session = self.store.session(&self.session_id)?;
        let fail = |expected: String, actual: String| Failure::Run(self.fail(seq, "expect", expected, actual));
        if let Some(step) = e.step {
            if session.step != step {
                return Err(fail(format!("step {step:?}"), format!("step {:?}", session.step)));
            }
        }
        let entry = |name: &str| {
            self.diagnoses.get(name).and_then(|id| session.entry(id)).ok_or_else(|| {
                fail(format!("diagnosis `{name}` to exist"), "it was never created".into())
            })
        };
        for (name, want) in &e.diagnoses {
            let entry = entry(name)?;
            if entry.removed || entry.category != *want {
                let got = if entry.removed { "removed".to_string() } else { format!("{:?}", entry.category) };
                return Err(fail(format!("{} in {want:?}", entry.label), format!("{} {got}", entry.label)));
            }
        }
        for (name, refs) in &e.evidence {
            let entry = entry(name)?;
            if let Some(missing) = refs.iter().find(|r| !entry.evidence_refs.contains(r)) {
                let cited: Vec<String> = entry.evidence_refs.iter().map(ToString::to_string).collect();
                return Err(fail(format!("{} cites {missing}", entry.label), format!("cites [{}]", cited.join(", "))));
            }
        }
        for name in &e.removed {
            let entry = entry(name)?;
            if !entry.removed {
                return Err(fail(format!("{} removed", entry.label), format!("{} in {:?}", entry.label, entry.category)));
            }
        }
        if let Some(want) = &e.revealed {
            if *want != session.revealed_packet_ids {
                return Err(fail(format!("revealed {want:?}"), format!("revealed {:?}", session.revealed_packet_ids)));
            }
        }
        for (section, needle) in &e.report_contains {
            let Some(report) = &session.report else {
                return Err(fail(format!("{section:?} contains {needle:?}"), "no report".into()));
            };
            let s = report.section(*section);
            let text = format!("{}\n{}", s.auto_content, s.learner_content);
            if !text.contains(needle.as_str()) {
                return Err(fail(format!("{section:?} contains {needle:?}"), format!("{section:?} is {text:?}")));
            }
        }
        Ok(())
    }
}

enum Failure {
    Store(StoreError),
    Run(RunError),
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Failure::Store(e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure::Run(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_must_be_defined_first() {
        let err = parse_script(
            r#"{"case_id": "c", "steps": [
                {"op": "move_diagnosis", "diagnosis": "a", "category": "NotLikely"},
                {"op": "add_diagnosis", "name": "a", "label": "A", "category": "MostLikely"}
            ]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ScriptError::Undefined { seq: 0, ref name, .. } if name == "a"));
    }

    #[test]
    fn failed_definitions_do_not_bind() {
        let text = r#"{"case_id": "c", "steps": [
            {"op": "add_node", "name": "n", "factor": "Hunches", "text": "x", "expect_error": "UnknownFactor"},
            {"op": "edit_node", "node": "n", "text": "y"}
        ]}"#;
        assert!(matches!(parse_script(text), Err(ScriptError::Undefined { seq: 1, .. })));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let text = r#"{"case_id": "c", "steps": [
            {"op": "add_diagnosis", "name": "a", "label": "A", "category": "MostLikely"},
            {"op": "add_diagnosis", "name": "a", "label": "B", "category": "NotLikely"}
        ]}"#;
        assert!(matches!(parse_script(text), Err(ScriptError::Duplicate { seq: 1, .. })));
    }

    #[test]
    fn unknown_ops_and_fields_fail_with_a_path() {
        let err = parse_script(r#"{"case_id": "c", "steps": [{"op": "dance"}]}"#).unwrap_err();
        assert!(err.to_string().contains("steps[0]"), "{err}");
        assert!(parse_script(r#"{"case_id": "c", "stepz": []}"#).is_err());
    }

    #[test]
    fn expectation_roundtrip() {
        let text = r#"{"case_id": "c", "steps": [
            {"op": "inquire", "text": "falls?", "expect": {"sudden falls": "Denied"}},
            {"op": "add_diagnosis", "name": "a", "label": "A", "category": "MostLikely"},
            {"op": "expect", "step": "ProblemFormulation", "diagnoses": {"a": "MostLikely"}, "report_contains": {"IdentifyProblems": "A"}}
        ]}"#;
        let script = parse_script(text).unwrap();
        let again = parse_script(&serde_json::to_string(&script).unwrap()).unwrap();
        assert_eq!(script, again);
        assert_eq!(script.steps[2].op.name(), "expect");
    }
}
