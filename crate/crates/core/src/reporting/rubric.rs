use std::collections::{BTreeMap, HashSet};
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize, Serializer};

use super::CrcStep;

pub const MAX_SCORE: i64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RubricCriterion {
    pub id: u8,
    pub dimension: CrcStep,
    pub title: &'static str,
    pub text: &'static str,
}

const fn criterion(id: u8, dimension: CrcStep, title: &'static str, text: &'static str) -> RubricCriterion {
    RubricCriterion { id, dimension, title, text }
}

/// Sixteen grading questions, two per reasoning-cycle dimension.
pub const RUBRIC: [RubricCriterion; 16] = [
    criterion(1, CrcStep::ConsiderSituation, "Description of Patient Situation",
        "Does the student describe the patient's condition, including chief complaint, symptoms, and background in a clinical context?"),
    criterion(2, CrcStep::ConsiderSituation, "Extraction of Key Information",
        "Does the student identify key issues, highlighting symptoms or signs relevant to the diagnosis?"),
    criterion(3, CrcStep::CollectCues, "Completeness of Information Collection",
        "Has the student gathered relevant clinical information (history, exam, labs)? Is it comprehensive?"),
    criterion(4, CrcStep::CollectCues, "Organization and Analysis of Information",
        "Is the information well-organized and integrated for analysis?"),
    criterion(5, CrcStep::ProcessInformation, "Depth of Information Processing",
        "Does the student analyze the information and extract diagnostic clues? Is reasoning clear?"),
    criterion(6, CrcStep::ProcessInformation, "Logical Consistency of Reasoning",
        "Does the student explain relationships between data points in a logical manner?"),
    criterion(7, CrcStep::IdentifyProblems, "Accuracy of Problem Identification",
        "Does the student accurately identify the core problem and explain differential diagnoses?"),
    criterion(8, CrcStep::IdentifyProblems, "Completeness of Differential Diagnosis",
        "Has the student proposed multiple diagnoses based on available data?"),
    criterion(9, CrcStep::EstablishGoals, "Reasonableness of Goal Setting",
        "Does the student set clear goals based on identified issues and the patient's needs?"),
    criterion(10, CrcStep::EstablishGoals, "Specificity and Feasibility of Goals",
        "Are the treatment goals specific, actionable, and achievable (e.g., symptom improvement, ruling out conditions)?"),
    criterion(11, CrcStep::TakeAction, "Appropriateness of Actions Taken",
        "Has the student developed an appropriate plan (e.g., treatment, further tests, follow-up)?"),
    criterion(12, CrcStep::TakeAction, "Evidence Support for Actions",
        "Does the student provide strong supporting evidence for chosen actions (e.g., literature, guidelines)?"),
    criterion(13, CrcStep::EvaluateOutcomes, "Comprehensiveness of Outcome Evaluation",
        "Does the student evaluate the outcomes comprehensively, considering treatment effects and patient responses?"),
    criterion(14, CrcStep::EvaluateOutcomes, "Reflection and Plan Adjustment",
        "Does the student reflect on the outcomes and adjust the plan if necessary?"),
    criterion(15, CrcStep::Reflect, "Depth of Reflection and Self-assessment",
        "Does the student self-reflect on strengths and weaknesses in their reasoning process?"),
    criterion(16, CrcStep::Reflect, "Integration and Application of Learning",
        "Can the student apply new learning to improve future clinical reasoning?"),
];

/// One rater's scores, keyed by criterion id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaterSheet {
    pub rater_id: String,
    #[serde(deserialize_with = "criterion_map")]
    pub scores: BTreeMap<u32, i64>,
}

/// Accepts criterion keys as JSON strings or integers, so sheets still
/// decode when buffered inside a flattened log record.
fn criterion_map<'de, D: serde::Deserializer<'de>>(d: D) -> Result<BTreeMap<u32, i64>, D::Error> {
    #[derive(PartialEq, Eq, PartialOrd, Ord)]
    struct Key(u32);

    impl<'de> Deserialize<'de> for Key {
        fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
            struct V;
            impl serde::de::Visitor<'_> for V {
                type Value = Key;
                fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                    f.write_str("a criterion id")
                }
                fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Key, E> {
                    u32::try_from(v).map(Key).map_err(|_| E::custom(format!("criterion id {v} is out of range")))
                }
                fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Key, E> {
                    v.parse().map(Key).map_err(|_| E::custom(format!("invalid criterion id `{v}`")))
                }
            }
            d.deserialize_any(V)
        }
    }

    let raw: BTreeMap<Key, i64> = Deserialize::deserialize(d)?;
    Ok(raw.into_iter().map(|(k, v)| (k.0, v)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScoreError {
    #[error("rater `{rater_id}`, criterion {criterion}: {reason}")]
    InvalidScore { rater_id: String, criterion: u32, reason: String },
    #[error("duplicate sheet for rater `{0}`")]
    DuplicateRater(String),
    #[error("no rater sheets")]
    NoSheets,
    #[error("malformed rater sheet at `{path}`: {message}")]
    Parse { path: String, message: String },
}

pub fn parse_rater_sheet(text: &str) -> Result<RaterSheet, ScoreError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let sheet: RaterSheet = serde_path_to_error::deserialize(de)
        .map_err(|e| ScoreError::Parse { path: e.path().to_string(), message: e.inner().to_string() })?;
    validate_sheet(&sheet)?;
    Ok(sheet)
}

/// Every criterion 1..=16 present exactly once, every score in 0..=7.
pub fn validate_sheet(sheet: &RaterSheet) -> Result<(), ScoreError> {
    let invalid = |criterion: u32, reason: String| ScoreError::InvalidScore { rater_id: sheet.rater_id.clone(), criterion, reason };
    for (&criterion, &score) in &sheet.scores {
        if !(1..=16).contains(&criterion) {
            return Err(invalid(criterion, "no such criterion".into()));
        }
        if !(0..=MAX_SCORE).contains(&score) {
            return Err(invalid(criterion, format!("score {score} is outside 0..={MAX_SCORE}")));
        }
    }
    if let Some(missing) = (1..=16).find(|c| !sheet.scores.contains_key(c)) {
        return Err(invalid(missing, "missing".into()));
    }
    Ok(())
}

/// An exact mean. Displays at two decimals, rounding half up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mean(pub Ratio<u64>);

impl Mean {
    fn of(values: impl IntoIterator<Item = Ratio<u64>>) -> Mean {
        let mut sum = Ratio::from_integer(0);
        let mut n = 0u64;
        for v in values {
            sum += v;
            n += 1;
        }
        Mean(sum / Ratio::from_integer(n.max(1)))
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    /// Hundredths, rounded half up.
    pub fn hundredths(self) -> u64 {
        let (p, q) = (*self.0.numer(), *self.0.denom());
        (200 * p + q) / (2 * q)
    }
}

impl fmt::Display for Mean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.hundredths();
        write!(f, "{}.{:02}", h / 100, h % 100)
    }
}

impl Serialize for Mean {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Mean", 3)?;
        st.serialize_field("exact", &format!("{}/{}", self.0.numer(), self.0.denom()))?;
        st.serialize_field("value", &self.to_f64())?;
        st.serialize_field("display", &self.to_string())?;
        st.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AggregateScore {
    pub raters: usize,
    pub per_criterion: BTreeMap<u32, Mean>,
    pub per_dimension: BTreeMap<CrcStep, Mean>,
    pub overall: Mean,
}

/// Criterion means over raters, dimension means over their two criteria,
/// overall mean over the eight dimensions.
pub fn aggregate_scores(sheets: &[RaterSheet]) -> Result<AggregateScore, ScoreError> {
    if sheets.is_empty() {
        return Err(ScoreError::NoSheets);
    }
    let mut raters = HashSet::new();
    for s in sheets {
        validate_sheet(s)?;
        if !raters.insert(s.rater_id.as_str()) {
            return Err(ScoreError::DuplicateRater(s.rater_id.clone()));
        }
    }

    let per_criterion: BTreeMap<u32, Mean> = RUBRIC
        .iter()
        .map(|c| {
            let id = u32::from(c.id);
            (id, Mean::of(sheets.iter().map(|s| Ratio::from_integer(s.scores[&id] as u64))))
        })
        .collect();
    let per_dimension: BTreeMap<CrcStep, Mean> = CrcStep::ALL
        .into_iter()
        .map(|d| {
            let means = RUBRIC.iter().filter(|c| c.dimension == d).map(|c| per_criterion[&u32::from(c.id)].0);
            (d, Mean::of(means))
        })
        .collect();
    let overall = Mean::of(per_dimension.values().map(|m| m.0));
    Ok(AggregateScore { raters: sheets.len(), per_criterion, per_dimension, overall })
}
