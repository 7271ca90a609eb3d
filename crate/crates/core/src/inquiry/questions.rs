use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::session::{FilaFactor, Step};

/// Placeholders that appear in prompting-question templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Symptoms,
    Facts,
    Findings,
    UpdatedData,
    InferencesAndHypotheses,
    Descriptions,
    Prognosis,
}

impl Slot {
    pub const ALL: [Slot; 7] = [
        Slot::Symptoms,
        Slot::Facts,
        Slot::Findings,
        Slot::UpdatedData,
        Slot::InferencesAndHypotheses,
        Slot::Descriptions,
        Slot::Prognosis,
    ];

    /// Name as written between angle brackets in a template.
    pub fn name(self) -> &'static str {
        match self {
            Slot::Symptoms => "symptoms",
            Slot::Facts => "facts",
            Slot::Findings => "findings",
            Slot::UpdatedData => "updated data",
            Slot::InferencesAndHypotheses => "inferences and hypotheses",
            Slot::Descriptions => "descriptions",
            Slot::Prognosis => "prognosis",
        }
    }

    fn from_name(name: &str) -> Option<Slot> {
        Slot::ALL.into_iter().find(|s| s.name() == name)
    }
}

pub type SlotBindings = BTreeMap<Slot, Vec<String>>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("no binding for slot <{0}>")]
pub struct MissingSlot(pub String);

/// Question templates for one (step, category) cell. The Problem
/// Formulation step has no learning-issue questions.
pub fn template_cell(step: Step, category: FilaFactor) -> &'static [&'static str] {
    use FilaFactor::*;
    use Step::*;
    match (step, category) {
        (ProblemFormulation, Facts) => &[
            "What facts are described in the current case?",
            "How can the <facts> be described in clinical syndrome descriptions?",
        ],
        (DiagnosisAnalysis, Facts) => &["What results do the <updated data> present, and what facts and findings do they indicate?"],
        (PrognosisReflection, Facts) => &[
            "What key points about prognosis are mentioned in the case?",
            "Are the <facts> related to diagnosis and treatment consistent with your previous analysis?",
            "What inconsistencies or overlooked aspects exist?",
        ],
        (ProblemFormulation, Ideas) => {
            &["Based on the fact that the patient exhibits <symptoms>, what inferences and hypotheses do you have?"]
        }
        (DiagnosisAnalysis, Ideas) => {
            &["What can we infer from <findings>, and how do they help you update the problem representation and reasoning?"]
        }
        (PrognosisReflection, Ideas) => &[
            "What caused the inconsistencies and overlooked of <facts>?",
            "Which part of the constructed logical chain caused these problems?",
        ],
        (ProblemFormulation, LearningIssues) => &[],
        (DiagnosisAnalysis, LearningIssues) => &[
            "Are the <descriptions> of the patient consistent with your problem representation?",
            "Is the <updated data> consistent with your previous action plans?",
        ],
        (PrognosisReflection, LearningIssues) => &[
            "What aspects were previously overlooked and needs consideration during <prognosis>?",
            "What was learned and strengthened from the analysis?",
            "What issues were identified and need further improvement?",
        ],
        (ProblemFormulation, ActionPlans) => &[
            "According to the <inferences and hypotheses>, what should the next action plans be? You may consider conducting specific examinations or treatments.",
        ],
        (DiagnosisAnalysis, ActionPlans) => &[
            "Based on the above analysis and reasoning, what further action plans should be considered? You may consider conducting specific examinations or treatments.",
        ],
        (PrognosisReflection, ActionPlans) => &["What are the targeted plans for further improvement and practice identified from the analysis?"],
    }
}

/// Fills the cell's templates. Bound values are joined with ", "; a slot
/// bound to an empty list renders as its bare name.
pub fn instantiate_prompting_question(
    step: Step,
    category: FilaFactor,
    bindings: &SlotBindings,
) -> Result<Vec<String>, MissingSlot> {
    template_cell(step, category).iter().map(|t| fill(t, bindings)).collect()
}

fn fill(template: &str, bindings: &SlotBindings) -> Result<String, MissingSlot> {
    let mut out = String::with_capacity(template.len() + 32);
    let mut rest = template;
    while let Some(open) = rest.find('<') {
        let Some(close) = rest[open..].find('>').map(|c| open + c) else { break };
        let name = &rest[open + 1..close];
        let slot = Slot::from_name(name).ok_or_else(|| MissingSlot(name.to_owned()))?;
        let values = bindings.get(&slot).ok_or_else(|| MissingSlot(name.to_owned()))?;
        out.push_str(&rest[..open]);
        if values.is_empty() {
            out.push_str(slot.name());
        } else {
            out.push_str(&values.join(", "));
        }
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}
