use std::cell::Cell;

use clinreason_core::case::{parse_case, validate_case, CaseRecord, Polarity};
use clinreason_core::inquiry::{answer_inquiry, evaluate_symptom, Lexicon, Verdict};
use proptest::prelude::*;
use proptest::sample::subsequence;
use serde_json::json;

/// Token-disjoint vocabulary, so no form is a sub-phrase of another.
const VOCAB: &[(&str, &[&str])] = &[
    ("fever", &["pyrexia"]),
    ("headache", &["cephalalgia"]),
    ("dizziness", &["vertigo"]),
    ("blackouts", &["syncope"]),
    ("nausea", &[]),
    ("vomiting", &["emesis"]),
    ("cough", &[]),
    ("wheeze", &["wheezing"]),
    ("rash", &["eruption"]),
    ("chills", &["rigors"]),
    ("palpitations", &[]),
    ("dyspnea", &["breathlessness"]),
    ("chest pain", &["thoracic ache"]),
    ("joint swelling", &[]),
    ("night sweats", &[]),
    ("weight loss", &[]),
    ("blurred vision", &[]),
    ("tinnitus", &[]),
    ("hematuria", &[]),
    ("insomnia", &[]),
    ("tremor", &[]),
    ("sudden falls", &["drop attacks"]),
];

const FILLER: &[&str] = &["the", "patient", "reports", "for", "two", "weeks", "and", "mild", "since", "monday"];

type Spec = (Vec<(usize, bool, bool)>, Vec<usize>);

fn spec() -> impl Strategy<Value = Spec> {
    let indices: Vec<usize> = (0..VOCAB.len()).collect();
    (subsequence(indices, 1..10), prop::collection::vec(any::<(bool, bool)>(), 10), prop::collection::vec(0..FILLER.len(), 3..12))
        .prop_map(|(chosen, flags, filler)| (chosen.into_iter().zip(flags).map(|(i, (d, init))| (i, d, init)).collect(), filler))
}

fn build(id: usize, (findings, filler): &Spec) -> CaseRecord {
    let mut narrative: Vec<String> = filler.iter().map(|&i| FILLER[i].to_string()).collect();
    let findings: Vec<_> = findings
        .iter()
        .map(|&(i, denied, initial)| {
            let (term, synonyms) = VOCAB[i];
            if !denied && initial {
                narrative.insert(narrative.len() / 2, term.to_string());
            }
            json!({
                "term": term,
                "synonyms": synonyms,
                "polarity": if denied { "Denied" } else { "Present" },
                "details": if denied { String::new() } else { format!("{term} for 4 days.") },
                "step_visibility": if !denied && initial { "Initial" } else { "OnInquiryOnly" },
            })
        })
        .collect();
    let doc = json!({
        "id": format!("gen-{id:04}"),
        "taxonomy_path": ["root"],
        "description": "generated",
        "initial_narrative": narrative.join(" "),
        "findings": findings,
        "packets": [{"id": "exam", "kind": "ExamText", "title": "Exam", "reveal_order": 1, "body": {"text": "normal"}}],
        "prognosis": "good",
        "ground_truth": {"diagnosis": "x", "treatment": "y"},
        "difficulty": {"incidence_per_100k": 20.0, "chain_length": 2, "classic_relevance": "NotRelated"},
    });
    parse_case(&doc.to_string()).expect("generated case is valid")
}

/// Brute-force expectation from the raw finding list.
fn expected(case: &CaseRecord, term: &str) -> Verdict {
    match case.findings.iter().find(|f| f.term.to_lowercase() == term).map(|f| f.polarity) {
        Some(Polarity::Present) => Verdict::Present,
        Some(Polarity::Denied) => Verdict::Denied,
        None => Verdict::NotInRecord,
    }
}

fn mentions(narrative: &str, form: &str) -> bool {
    let words: Vec<String> = narrative.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect();
    let needle: Vec<&str> = form.split(' ').collect();
    words.windows(needle.len()).any(|w| w.iter().map(String::as_str).eq(needle.iter().copied()))
}

pub fn negative_symptoms() -> Result<String, String> {
    let cases_seen = Cell::new(0usize);
    let pairs = Cell::new(0usize);
    let denied_seen = Cell::new(0usize);
    let mut runner = super::runner(3);
    let corpus = (200usize..240).prop_flat_map(|n| prop::collection::vec(spec(), n));
    runner
        .run(&corpus, |specs| {
            let cases: Vec<CaseRecord> = specs.iter().enumerate().map(|(i, s)| build(i, s)).collect();
            prop_assert!(cases.len() >= 200);
            let lexicon = Lexicon::from_cases(&cases);
            let mut disagreements = Vec::new();
            for case in &cases {
                for f in case.findings.iter().filter(|f| f.polarity == Polarity::Denied) {
                    denied_seen.set(denied_seen.get() + 1);
                    for form in std::iter::once(&f.term).chain(&f.synonyms) {
                        prop_assert!(!mentions(&case.initial_narrative, form), "{} narrative mentions {form}", case.id);
                    }
                    prop_assert!(validate_case(case).violations.is_empty(), "{} invalid", case.id);
                    let mut leaked = case.clone();
                    leaked.initial_narrative.push_str(&format!(" with {}", f.synonyms.first().unwrap_or(&f.term)));
                    let rules: Vec<_> = validate_case(&leaked).violations.iter().map(|v| v.rule).collect();
                    prop_assert!(rules.contains(&"case.narrative-mentions-denied"), "{} leak accepted", f.term);
                }
                for term in lexicon.terms() {
                    pairs.set(pairs.get() + 1);
                    let want = expected(case, term);
                    let direct = evaluate_symptom(case, term).verdict;
                    let asked = answer_inquiry(case, &lexicon, &format!("Has the patient had {term}?"));
                    if direct != want || asked.verdicts.len() != 1 || asked.verdicts[0].verdict != want {
                        disagreements.push(format!("{} / {term}", case.id));
                    }
                }
            }
            cases_seen.set(cases_seen.get() + cases.len());
            prop_assert!(disagreements.is_empty(), "disagreements: {:?}", disagreements);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!(
        "{} generated cases, {} denied findings leak-checked, {} (case, term) pairs, 0 disagreements",
        cases_seen.get(),
        denied_seen.get(),
        pairs.get()
    ))
}
