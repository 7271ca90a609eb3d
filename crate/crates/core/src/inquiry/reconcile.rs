use serde::Serialize;

use super::{InquiryResponse, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Disagreement {
    pub term: String,
    pub model: Verdict,
    pub oracle: Verdict,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConsistencyReport {
    pub agreements: Vec<String>,
    pub disagreements: Vec<Disagreement>,
    pub missing_in_model: Vec<String>,
    pub missing_in_oracle: Vec<String>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.disagreements.is_empty() && self.missing_in_model.is_empty() && self.missing_in_oracle.is_empty()
    }
}

/// Compares verdicts term by term, in the oracle's order.
pub fn reconcile_with_oracle(model: &InquiryResponse, oracle: &InquiryResponse) -> ConsistencyReport {
    let mut report = ConsistencyReport::default();
    for o in &oracle.verdicts {
        match model.verdicts.iter().find(|m| m.term == o.term) {
            Some(m) if m.verdict == o.verdict => report.agreements.push(o.term.clone()),
            Some(m) => report.disagreements.push(Disagreement { term: o.term.clone(), model: m.verdict, oracle: o.verdict }),
            None => report.missing_in_model.push(o.term.clone()),
        }
    }
    for m in &model.verdicts {
        if !oracle.verdicts.iter().any(|o| o.term == m.term) {
            report.missing_in_oracle.push(m.term.clone());
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inquiry::SymptomVerdict;

    fn resp(v: &[(&str, Verdict)]) -> InquiryResponse {
        InquiryResponse::with_verdicts(
            v.iter()
                .map(|(t, v)| SymptomVerdict { term: (*t).into(), verdict: *v, details: String::new() })
                .collect(),
        )
    }

    #[test]
    fn identical_agree() {
        let a = resp(&[("fever", Verdict::Present), ("headache", Verdict::NotInRecord)]);
        let r = reconcile_with_oracle(&a, &a);
        assert!(r.is_consistent());
        assert_eq!(r.agreements, ["fever", "headache"]);
    }

    #[test]
    fn single_diff_and_missing() {
        let oracle = resp(&[("fever", Verdict::NotInRecord), ("cough", Verdict::Denied)]);
        let model = resp(&[("fever", Verdict::Present), ("rash", Verdict::Present)]);
        let r = reconcile_with_oracle(&model, &oracle);
        assert_eq!(r.disagreements, [Disagreement { term: "fever".into(), model: Verdict::Present, oracle: Verdict::NotInRecord }]);
        assert_eq!(r.missing_in_model, ["cough"]);
        assert_eq!(r.missing_in_oracle, ["rash"]);
    }
}
