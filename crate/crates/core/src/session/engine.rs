use serde::Serialize;

use super::{
    Action, ActionRecord, Annotation, DiagnosisAction, DiagnosisEntry, EvidenceRef, HistoryEvent, HistoryRecord,
    InquirySource, MindMap, MindMapAction, MindMapNode, NodeEdit, Role, Session, SessionError, Step, TranscriptEntry,
};
use crate::case::{CaseRecord, EvidencePacket, PacketKind};
use crate::clock::Timestamp;
use crate::inquiry::{InquiryResponse, Verdict};
use crate::reporting::{generate_report, validate_sheet};

/// What an applied action produced, beyond the state change.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Started,
    Answered { response: InquiryResponse },
    Advanced { step: Step },
    Revealed { packet_id: String },
    DiagnosisUpdated { entry_id: String },
    MindMapUpdated { node_id: String },
    Annotated { index: usize },
    ReportGenerated,
    ScoresRecorded { rater_id: String },
}

type Result<T> = std::result::Result<T, SessionError>;

impl Session {
    /// Builds a session from its start record.
    pub fn start(case: &CaseRecord, record: &ActionRecord) -> Result<Session> {
        let Action::Start { session_id, case_id } = &record.action else {
            return Err(SessionError::NotStarted);
        };
        if record.seq != 0 {
            return Err(SessionError::SequenceGap { expected: 0, got: record.seq });
        }
        if *case_id != case.id {
            return Err(SessionError::CaseMismatch { expected: case.id.clone(), got: case_id.clone() });
        }
        Ok(Session {
            id: session_id.clone(),
            case_id: case_id.clone(),
            step: Step::ProblemFormulation,
            transcript: Vec::new(),
            diagnosis_list: Vec::new(),
            mind_map: MindMap::default(),
            annotations: Vec::new(),
            revealed_packet_ids: Vec::new(),
            created_at: record.timestamp,
            updated_at: record.timestamp,
            report: None,
            rater_sheets: Vec::new(),
            next_seq: 1,
            next_entry: 1,
            next_node: 1,
        })
    }

    /// The start record for a new session.
    pub fn start_record(session_id: &str, case_id: &str, timestamp: Timestamp) -> ActionRecord {
        ActionRecord {
            seq: 0,
            timestamp,
            actor: "system".into(),
            action: Action::Start { session_id: session_id.into(), case_id: case_id.into() },
        }
    }

    /// Rebuilds a session from a complete log.
    pub fn replay<'a>(case: &CaseRecord, records: impl IntoIterator<Item = &'a ActionRecord>) -> Result<Session> {
        let mut iter = records.into_iter();
        let first = iter.next().ok_or(SessionError::NotStarted)?;
        let mut session = Session::start(case, first)?;
        for r in iter {
            session.apply(case, r)?;
        }
        Ok(session)
    }

    /// Builds the next record for `action` and applies it.
    pub fn execute(
        &mut self,
        case: &CaseRecord,
        action: Action,
        actor: &str,
        timestamp: Timestamp,
    ) -> Result<(ActionRecord, Outcome)> {
        let record = ActionRecord { seq: self.next_seq, timestamp: timestamp.max(self.updated_at), actor: actor.into(), action };
        let outcome = self.apply(case, &record)?;
        Ok((record, outcome))
    }

    /// Applies one logged record. On error the session is unchanged.
    pub fn apply(&mut self, case: &CaseRecord, record: &ActionRecord) -> Result<Outcome> {
        if record.seq != self.next_seq {
            return Err(SessionError::SequenceGap { expected: self.next_seq, got: record.seq });
        }
        if record.timestamp < self.updated_at {
            return Err(SessionError::StaleTimestamp { last: self.updated_at.0, got: record.timestamp.0 });
        }
        if case.id != self.case_id {
            return Err(SessionError::CaseMismatch { expected: self.case_id.clone(), got: case.id.clone() });
        }
        let mut next = self.clone();
        let outcome = next.apply_action(case, record.timestamp, &record.action)?;
        next.next_seq += 1;
        next.updated_at = record.timestamp;
        *self = next;
        Ok(outcome)
    }

    fn apply_action(&mut self, case: &CaseRecord, ts: Timestamp, action: &Action) -> Result<Outcome> {
        match action {
            Action::Start { .. } => Err(SessionError::PreconditionFailed("session already started".into())),
            Action::Inquiry { text, source, response } => self.record_inquiry(ts, text, *source, response),
            Action::Advance => self.advance(case),
            Action::RequestEvidence => self.reveal_next(case, ts),
            Action::Diagnosis(a) => self.diagnosis(case, ts, a),
            Action::Mindmap(a) => self.mindmap(case, ts, a),
            Action::Annotate(a) => self.annotate(case, a),
            Action::GenerateReport => {
                let mut report = generate_report(self, case).map_err(|_| SessionError::WrongStep)?;
                if let Some(prev) = &self.report {
                    for (new, old) in report.sections.iter_mut().zip(&prev.sections) {
                        new.learner_content = old.learner_content.clone();
                    }
                }
                self.report = Some(report);
                Ok(Outcome::ReportGenerated)
            }
            Action::EditReport { section, text } => {
                let report = self.report.as_mut().ok_or_else(|| SessionError::NotFound("report".into()))?;
                let s = report
                    .sections
                    .iter_mut()
                    .find(|s| s.step == *section)
                    .ok_or_else(|| SessionError::NotFound(format!("report section {section:?}")))?;
                s.learner_content = text.clone();
                Ok(Outcome::ReportGenerated)
            }
            Action::SubmitScores(sheet) => {
                if self.report.is_none() {
                    return Err(SessionError::NotFound("report".into()));
                }
                validate_sheet(sheet)?;
                self.rater_sheets.retain(|s| s.rater_id != sheet.rater_id);
                self.rater_sheets.push(sheet.clone());
                Ok(Outcome::ScoresRecorded { rater_id: sheet.rater_id.clone() })
            }
        }
    }

    fn record_inquiry(&mut self, ts: Timestamp, text: &str, source: InquirySource, response: &InquiryResponse) -> Result<Outcome> {
        check_response(response)?;
        self.transcript.push(TranscriptEntry { timestamp: ts, role: Role::Learner, text: text.to_owned(), response: None });
        let mut rendered = render_response(response);
        if source == InquirySource::Model {
            rendered.insert_str(0, "[model] ");
        }
        self.transcript.push(TranscriptEntry { timestamp: ts, role: Role::System, text: rendered, response: Some(response.clone()) });
        Ok(Outcome::Answered { response: response.clone() })
    }

    fn advance(&mut self, case: &CaseRecord) -> Result<Outcome> {
        let next = self.step.next().ok_or(SessionError::InvalidTransition)?;
        match self.step {
            Step::ProblemFormulation if !self.diagnosis_list.iter().any(|e| !e.removed) => {
                return Err(SessionError::PreconditionFailed("diagnosis list empty".into()));
            }
            Step::DiagnosisAnalysis if self.revealed_packet_ids.len() < case.packets.len() => {
                return Err(SessionError::PreconditionFailed("unrevealed evidence".into()));
            }
            _ => {}
        }
        self.step = next;
        Ok(Outcome::Advanced { step: next })
    }

    /// The packet the next evidence request would reveal.
    pub fn next_packet<'c>(&self, case: &'c CaseRecord) -> Option<&'c EvidencePacket> {
        case.packets_in_reveal_order().into_iter().nth(self.revealed_packet_ids.len())
    }

    fn reveal_next(&mut self, case: &CaseRecord, ts: Timestamp) -> Result<Outcome> {
        if self.step != Step::DiagnosisAnalysis {
            return Err(SessionError::PreconditionFailed("evidence is requested during diagnosis analysis".into()));
        }
        let packet = self.next_packet(case).ok_or(SessionError::Exhausted)?;
        self.revealed_packet_ids.push(packet.id.clone());
        self.transcript.push(TranscriptEntry {
            timestamp: ts,
            role: Role::System,
            text: format!("Revealed: {}", packet.title),
            response: None,
        });
        Ok(Outcome::Revealed { packet_id: packet.id.clone() })
    }

    /// Checks that a reference resolves in this session and case.
    pub fn resolve_ref(&self, case: &CaseRecord, r: &EvidenceRef) -> Result<()> {
        let ok = match r {
            EvidenceRef::Transcript { index } => *index < self.transcript.len(),
            EvidenceRef::Finding { term } => case.finding(&crate::text::normalize(term)).is_some(),
            EvidenceRef::Packet { id } => {
                if case.packet(id).is_some() && !self.is_revealed(id) {
                    return Err(SessionError::NotRevealed(id.clone()));
                }
                case.packet(id).is_some()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SessionError::NotFound(format!("reference {r}")))
        }
    }

    fn live_entry_mut(&mut self, id: &str) -> Result<&mut DiagnosisEntry> {
        let entry = self
            .diagnosis_list
            .iter_mut()
            .find(|e| e.id == id)
            .ok_or_else(|| SessionError::NotFound(format!("diagnosis entry `{id}`")))?;
        if entry.removed {
            return Err(SessionError::PreconditionFailed(format!("diagnosis entry `{id}` was removed")));
        }
        Ok(entry)
    }

    fn diagnosis(&mut self, case: &CaseRecord, ts: Timestamp, action: &DiagnosisAction) -> Result<Outcome> {
        let post_reveal = self.step == Step::PrognosisReflection;
        let record = |event, category, note: &str| HistoryRecord { timestamp: ts, event, category, note: note.to_owned(), post_reveal };
        let id = match action {
            DiagnosisAction::Add { label, category, rationale } => {
                if label.trim().is_empty() {
                    return Err(SessionError::PreconditionFailed("diagnosis label is empty".into()));
                }
                let id = format!("dx{}", self.next_entry);
                self.next_entry += 1;
                self.diagnosis_list.push(DiagnosisEntry {
                    id: id.clone(),
                    label: label.clone(),
                    category: *category,
                    rationale: rationale.clone(),
                    evidence_refs: Vec::new(),
                    history: vec![record(HistoryEvent::Created, *category, rationale)],
                    removed: false,
                });
                id
            }
            DiagnosisAction::Move { entry, new_category, note } => {
                let e = self.live_entry_mut(entry)?;
                if e.category == *new_category {
                    return Err(SessionError::NoOpMove);
                }
                e.category = *new_category;
                e.history.push(record(HistoryEvent::Moved, *new_category, note));
                entry.clone()
            }
            DiagnosisAction::AttachEvidence { entry, reference } => {
                self.resolve_ref(case, reference)?;
                let e = self.live_entry_mut(entry)?;
                e.evidence_refs.push(reference.clone());
                let category = e.category;
                e.history.push(record(HistoryEvent::EvidenceAttached, category, &reference.to_string()));
                entry.clone()
            }
            DiagnosisAction::Remove { entry, note } => {
                let e = self.live_entry_mut(entry)?;
                e.removed = true;
                let category = e.category;
                e.history.push(record(HistoryEvent::Removed, category, note));
                entry.clone()
            }
        };
        Ok(Outcome::DiagnosisUpdated { entry_id: id })
    }

    fn mindmap(&mut self, case: &CaseRecord, ts: Timestamp, action: &MindMapAction) -> Result<Outcome> {
        let step = self.step;
        let id = match action {
            MindMapAction::AddNode { factor, text, source_ref } => {
                if let Some(r) = source_ref {
                    self.resolve_ref(case, r)?;
                }
                let id = format!("n{}", self.next_node);
                self.next_node += 1;
                let node = MindMapNode {
                    id: id.clone(),
                    text: text.clone(),
                    source_ref: source_ref.clone(),
                    created_at_step: step,
                    edit_history: vec![NodeEdit { timestamp: ts, step, text: text.clone() }],
                };
                self.mind_map.branches.entry(*factor).or_default().push(node);
                id
            }
            MindMapAction::EditNode { id, text } => {
                let (factor, i) = self.mind_map.find(id).ok_or_else(|| SessionError::NotFound(format!("mind-map node `{id}`")))?;
                let node = &mut self.mind_map.branches.get_mut(&factor).expect("branch exists")[i];
                node.text = text.clone();
                node.edit_history.push(NodeEdit { timestamp: ts, step, text: text.clone() });
                id.clone()
            }
            MindMapAction::RemoveNode { id } => {
                let (factor, i) = self.mind_map.find(id).ok_or_else(|| SessionError::NotFound(format!("mind-map node `{id}`")))?;
                self.mind_map.branches.get_mut(&factor).expect("branch exists").remove(i);
                id.clone()
            }
        };
        Ok(Outcome::MindMapUpdated { node_id: id })
    }

    fn annotate(&mut self, case: &CaseRecord, annotation: &Annotation) -> Result<Outcome> {
        let packet = case
            .packet(&annotation.packet_id)
            .ok_or_else(|| SessionError::NotFound(format!("packet `{}`", annotation.packet_id)))?;
        if !self.is_revealed(&packet.id) {
            return Err(SessionError::NotRevealed(packet.id.clone()));
        }
        if packet.kind() != PacketKind::ImagingStudy {
            return Err(SessionError::WrongKind(packet.id.clone()));
        }
        annotation.check_geometry().map_err(SessionError::GeometryError)?;
        self.annotations.push(annotation.clone());
        Ok(Outcome::Annotated { index: self.annotations.len() - 1 })
    }
}

fn check_response(r: &InquiryResponse) -> Result<()> {
    let bad = |m: &str| Err(SessionError::InvalidResponse(m.into()));
    if r.needs_clarification != r.verdicts.is_empty() {
        return bad("clarification flag must be set exactly when there are no verdicts");
    }
    for v in &r.verdicts {
        match v.verdict {
            Verdict::Present if v.details.trim().is_empty() => return bad("present verdict without details"),
            Verdict::NotInRecord if !v.details.is_empty() => return bad("not-in-record verdict with details"),
            _ => {}
        }
    }
    Ok(())
}

/// Plain-text rendering of a response, as shown in the transcript.
pub fn render_response(r: &InquiryResponse) -> String {
    if r.needs_clarification {
        return r.clarification_text.clone().unwrap_or_else(|| crate::inquiry::CLARIFICATION.to_owned());
    }
    r.verdicts
        .iter()
        .map(|v| match v.verdict {
            Verdict::Present => format!("{}: Yes\nRelevant Data: {}", capitalize(&v.term), v.details),
            Verdict::Denied => format!("{}: No\nRelevant Data: {}", capitalize(&v.term), v.details),
            Verdict::NotInRecord => format!("{}: Irrelevant", capitalize(&v.term)),
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
