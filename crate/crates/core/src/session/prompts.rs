use std::collections::BTreeMap;

use super::{DiagnosisCategory, FilaFactor, Session};
use crate::case::{CaseRecord, Polarity, StepVisibility};
use crate::inquiry::{instantiate_prompting_question, MissingSlot, Slot, SlotBindings, Verdict};

/// Slot values drawn from the session:
///
/// - symptoms: present findings surfaced so far (initial narrative findings
///   plus inquiry answers);
/// - facts: the same plus "denied <term>" for surfaced denials;
/// - findings / updated data: titles of revealed packets;
/// - inferences and hypotheses: live most-likely and need-to-rule-out entries;
/// - descriptions / prognosis: the case's description and prognosis text.
pub fn slot_bindings(session: &Session, case: &CaseRecord) -> SlotBindings {
    let mut surfaced: Vec<(String, Polarity)> = case
        .findings
        .iter()
        .filter(|f| f.polarity == Polarity::Present && f.step_visibility == StepVisibility::Initial)
        .map(|f| (f.canonical(), Polarity::Present))
        .collect();
    for v in session.transcript.iter().filter_map(|t| t.response.as_ref()).flat_map(|r| &r.verdicts) {
        let polarity = match v.verdict {
            Verdict::Present => Polarity::Present,
            Verdict::Denied => Polarity::Denied,
            Verdict::NotInRecord => continue,
        };
        if !surfaced.iter().any(|(t, _)| *t == v.term) {
            surfaced.push((v.term.clone(), polarity));
        }
    }

    let symptoms: Vec<String> =
        surfaced.iter().filter(|(_, p)| *p == Polarity::Present).map(|(t, _)| t.clone()).collect();
    let facts: Vec<String> = surfaced
        .iter()
        .map(|(t, p)| match p {
            Polarity::Present => t.clone(),
            Polarity::Denied => format!("denied {t}"),
        })
        .collect();
    let packets: Vec<String> = session
        .revealed_packet_ids
        .iter()
        .filter_map(|id| case.packet(id))
        .map(|p| p.title.clone())
        .collect();
    let hypotheses: Vec<String> = session
        .entries_in(DiagnosisCategory::MostLikely)
        .chain(session.entries_in(DiagnosisCategory::NeedToRuleOut))
        .map(|e| e.label.clone())
        .collect();
    let text = |s: &str| if s.trim().is_empty() { vec![] } else { vec![s.trim().to_owned()] };

    BTreeMap::from([
        (Slot::Symptoms, symptoms),
        (Slot::Facts, facts),
        (Slot::Findings, packets.clone()),
        (Slot::UpdatedData, packets),
        (Slot::InferencesAndHypotheses, hypotheses),
        (Slot::Descriptions, text(&case.description)),
        (Slot::Prognosis, text(&case.prognosis)),
    ])
}

/// Prompting questions for the session's current step, by factor.
pub fn current_prompts(session: &Session, case: &CaseRecord) -> Result<BTreeMap<FilaFactor, Vec<String>>, MissingSlot> {
    let bindings = slot_bindings(session, case);
    FilaFactor::ALL
        .into_iter()
        .map(|f| Ok((f, instantiate_prompting_question(session.step, f, &bindings)?)))
        .collect()
}
