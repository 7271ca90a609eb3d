use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::case::CaseRecord;
use crate::inquiry::Verdict;
use crate::session::{DiagnosisCategory, EvidenceRef, FilaFactor, HistoryEvent, Session, Step};
use crate::text::normalize;

/// The eight steps of the clinical reasoning cycle, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CrcStep {
    ConsiderSituation,
    CollectCues,
    ProcessInformation,
    IdentifyProblems,
    EstablishGoals,
    TakeAction,
    EvaluateOutcomes,
    Reflect,
}

impl CrcStep {
    pub const ALL: [CrcStep; 8] = [
        CrcStep::ConsiderSituation,
        CrcStep::CollectCues,
        CrcStep::ProcessInformation,
        CrcStep::IdentifyProblems,
        CrcStep::EstablishGoals,
        CrcStep::TakeAction,
        CrcStep::EvaluateOutcomes,
        CrcStep::Reflect,
    ];

    pub fn title(self) -> &'static str {
        match self {
            CrcStep::ConsiderSituation => "Consider the Patient Situation",
            CrcStep::CollectCues => "Collect Cues and Information",
            CrcStep::ProcessInformation => "Process Information",
            CrcStep::IdentifyProblems => "Identify Problems/Issues",
            CrcStep::EstablishGoals => "Establish Goals",
            CrcStep::TakeAction => "Take Action",
            CrcStep::EvaluateOutcomes => "Evaluate Outcomes",
            CrcStep::Reflect => "Reflect on the Process and New Learning",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrcSection {
    pub step: CrcStep,
    /// Assembled from the session; regenerated on every report request.
    pub auto_content: String,
    /// Written by the learner; never overwritten by generation.
    pub learner_content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseReport {
    pub session_id: String,
    pub sections: Vec<CrcSection>,
}

impl CaseReport {
    pub fn section(&self, step: CrcStep) -> &CrcSection {
        self.sections.iter().find(|s| s.step == step).expect("reports carry all eight sections")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("report requires the prognosis reflection step")]
    WrongStep,
}

fn bullets<'a>(out: &mut String, items: impl IntoIterator<Item = &'a str>) {
    for item in items {
        let _ = writeln!(out, "- {item}");
    }
}

fn describe_ref(case: &CaseRecord, session: &Session, r: &EvidenceRef) -> String {
    match r {
        EvidenceRef::Packet { id } => match case.packet(id) {
            Some(p) => format!("{r} ({})", p.title),
            None => r.to_string(),
        },
        EvidenceRef::Transcript { index } => match session.transcript.get(*index) {
            Some(t) => format!("{r} ({})", t.text.lines().next().unwrap_or_default()),
            None => r.to_string(),
        },
        EvidenceRef::Finding { .. } => r.to_string(),
    }
}

fn category_name(c: DiagnosisCategory) -> &'static str {
    match c {
        DiagnosisCategory::MostLikely => "MostLikely",
        DiagnosisCategory::NeedToRuleOut => "NeedToRuleOut",
        DiagnosisCategory::NotLikely => "NotLikely",
    }
}

/// Assembles the auto-populated content of all eight sections.
pub fn generate_report(session: &Session, case: &CaseRecord) -> Result<CaseReport, ReportError> {
    if session.step != Step::PrognosisReflection {
        return Err(ReportError::WrongStep);
    }
    let nodes = |f: FilaFactor| session.mind_map.branch(f).iter();

    let consider = case.initial_narrative.trim().to_owned();

    let mut cues = String::new();
    let mut seen = Vec::new();
    for v in session.transcript.iter().filter_map(|t| t.response.as_ref()).flat_map(|r| &r.verdicts) {
        if v.verdict == Verdict::NotInRecord || seen.contains(&v.term) {
            continue;
        }
        seen.push(v.term.clone());
        let _ = match v.verdict {
            Verdict::Present => writeln!(cues, "- {}: present ({})", v.term, v.details),
            _ => writeln!(cues, "- {}: denied", v.term),
        };
    }
    for id in &session.revealed_packet_ids {
        if let Some(p) = case.packet(id) {
            let _ = writeln!(cues, "- Evidence reviewed: {}", p.title);
        }
    }

    let mut process = String::new();
    for (factor, heading) in [(FilaFactor::Facts, "Facts"), (FilaFactor::Ideas, "Ideas")] {
        if session.mind_map.branch(factor).is_empty() {
            continue;
        }
        let _ = writeln!(process, "{heading}:");
        bullets(&mut process, nodes(factor).map(|n| n.text.as_str()));
    }

    let mut problems = String::new();
    for category in DiagnosisCategory::ALL {
        let entries: Vec<_> = session.diagnosis_list.iter().filter(|e| e.category == category).collect();
        if entries.is_empty() {
            continue;
        }
        let _ = writeln!(problems, "{}:", category_name(category));
        for e in entries {
            let _ = write!(problems, "- {}", e.label);
            if e.removed {
                problems.push_str(" [removed]");
            }
            if !e.rationale.is_empty() {
                let _ = write!(problems, ": {}", e.rationale);
            }
            if !e.evidence_refs.is_empty() {
                let refs: Vec<_> = e.evidence_refs.iter().map(|r| describe_ref(case, session, r)).collect();
                let _ = write!(problems, " (evidence: {})", refs.join("; "));
            }
            problems.push('\n');
        }
    }

    let plans = |steps: &[Step]| {
        let mut out = String::new();
        bullets(&mut out, nodes(FilaFactor::ActionPlans).filter(|n| steps.contains(&n.created_at_step)).map(|n| n.text.as_str()));
        out
    };
    let goals = plans(&[Step::ProblemFormulation]);
    let actions = plans(&[Step::DiagnosisAnalysis, Step::PrognosisReflection]);

    let mut evaluate = format!("Final diagnosis: {}\nTreatment: {}\n", case.ground_truth.diagnosis, case.ground_truth.treatment);
    let truth = normalize(&case.ground_truth.diagnosis);
    let mut matched = false;
    for e in &session.diagnosis_list {
        let path: Vec<&str> = e.history.iter().filter(|h| h.event != HistoryEvent::EvidenceAttached).map(|h| category_name(h.category)).collect();
        let mut path = path;
        path.dedup();
        let hit = normalize(&e.label) == truth;
        matched |= hit;
        let _ = writeln!(
            evaluate,
            "- {}: {}{}{}",
            e.label,
            path.join(" -> "),
            if e.removed { " -> removed" } else { "" },
            if hit { " (matches final diagnosis)" } else { "" }
        );
    }
    if !matched {
        evaluate.push_str("- The final diagnosis was not on the diagnosis list.\n");
    }

    let mut reflect = String::new();
    bullets(&mut reflect, nodes(FilaFactor::LearningIssues).map(|n| n.text.as_str()));
    let post: Vec<String> = session
        .diagnosis_list
        .iter()
        .flat_map(|e| e.history.iter().filter(|h| h.post_reveal).map(move |h| (e, h)))
        .map(|(e, h)| {
            let what = match h.event {
                HistoryEvent::Created => format!("added as {}", category_name(h.category)),
                HistoryEvent::Moved => format!("moved to {}", category_name(h.category)),
                HistoryEvent::EvidenceAttached => format!("evidence attached ({})", h.note),
                HistoryEvent::Removed => "removed".to_owned(),
            };
            format!("{}: {what}", e.label)
        })
        .collect();
    if !post.is_empty() {
        reflect.push_str("Edits after the final diagnosis was shown:\n");
        bullets(&mut reflect, post.iter().map(String::as_str));
    }

    let contents = [consider, cues, process, problems, goals, actions, evaluate, reflect];
    Ok(CaseReport {
        session_id: session.id.clone(),
        sections: CrcStep::ALL
            .into_iter()
            .zip(contents)
            .map(|(step, auto)| CrcSection { step, auto_content: auto.trim_end().to_owned(), learner_content: String::new() })
            .collect(),
    })
}

/// Human-readable rendering of a report.
pub fn render_report_text(report: &CaseReport) -> String {
    let mut out = format!("Case analysis report for session {}\n", report.session_id);
    for (i, s) in report.sections.iter().enumerate() {
        let _ = write!(out, "\n{}. {}\n", i + 1, s.step.title());
        if !s.auto_content.is_empty() {
            let _ = writeln!(out, "{}", s.auto_content);
        }
        if !s.learner_content.is_empty() {
            let _ = writeln!(out, "\nLearner notes:\n{}", s.learner_content);
        }
    }
    out
}
