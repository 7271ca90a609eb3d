mod state_machine;
mod symptoms;

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use clinreason_core::case::{ClassicRelevance, CaseRecord};
use clinreason_core::difficulty::{classify_dimension, DifficultyLevel, DifficultyProfile, DimensionValue};
use clinreason_core::inquiry::{
    answer_inquiry, instantiate_prompting_question, model_answer, reconcile_with_oracle, render_case_prompt,
    AdapterError, CompletionBackend, ModelAdapter, Slot, SlotBindings, TransportError, Verdict,
};
use clinreason_core::reporting::{aggregate_scores, import_bundle, CrcStep, RaterSheet, ScoreError};
use clinreason_core::session::{current_prompts, DiagnosisCategory, FilaFactor, Session, Step};
use clinreason_core::Corpus;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub use state_machine::state_machine;
pub use symptoms::negative_symptoms;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn corpus() -> Corpus {
    Corpus::load(&fixtures().join("corpus")).expect("fixture corpus loads")
}

pub fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {:.3} s, limit {:.0} s", took.as_secs_f64(), limit.as_secs_f64()))
}

pub fn difficulty_table() -> Result<String, String> {
    use DifficultyLevel::*;
    let start = Instant::now();
    let rates: [(f64, DifficultyLevel); 7] =
        [(5.0, High), (9.99, High), (10.0, Medium), (50.0, Medium), (100.0, Medium), (100.01, Low), (150.0, Low)];
    let chains: [(u32, DifficultyLevel); 5] = [(1, Low), (3, Low), (4, Medium), (7, Medium), (8, High)];
    let relevance = [
        (ClassicRelevance::DirectlyRelated, Low),
        (ClassicRelevance::SomewhatRelated, Medium),
        (ClassicRelevance::NotRelated, High),
    ];
    // Independent reading of the criteria table.
    let by_rate = |r: f64| if r > 100.0 { Low } else if r >= 10.0 { Medium } else { High };
    let by_chain = |c: u32| match c {
        1..=3 => Low,
        4..=7 => Medium,
        _ => High,
    };

    let mut checked = 0;
    for (rate, want) in rates {
        let got = classify_dimension(DimensionValue::Incidence(rate)).map_err(|e| e.to_string())?;
        ensure(got == want && got == by_rate(rate), || format!("incidence {rate}: got {got:?}, want {want:?}"))?;
        checked += 1;
    }
    for (chain, want) in chains {
        let got = classify_dimension(DimensionValue::Chain(chain)).map_err(|e| e.to_string())?;
        ensure(got == want && got == by_chain(chain), || format!("chain {chain}: got {got:?}, want {want:?}"))?;
        checked += 1;
    }
    for (rel, want) in relevance {
        let got = classify_dimension(DimensionValue::Relevance(rel)).map_err(|e| e.to_string())?;
        ensure(got == want, || format!("relevance {rel:?}: got {got:?}, want {want:?}"))?;
        checked += 1;
    }
    let mut triples = 0;
    for a in DifficultyLevel::ALL {
        for b in DifficultyLevel::ALL {
            for c in DifficultyLevel::ALL {
                let p = DifficultyProfile::from_levels(a, b, c);
                let rank = |l: DifficultyLevel| DifficultyLevel::ALL.iter().position(|x| *x == l).unwrap() as u8 + 1;
                ensure((3..=9).contains(&p.aggregate) && p.aggregate == rank(a) + rank(b) + rank(c), || {
                    format!("{a:?}/{b:?}/{c:?} aggregates to {}", p.aggregate)
                })?;
                triples += 1;
            }
        }
    }
    within(Duration::from_secs(1), start)?;
    Ok(format!("{checked} golden values, {triples} triples in 3..=9"))
}

pub fn fever_qa() -> Result<String, String> {
    let corpus = corpus();
    let case = corpus.case("inf-fever-001").ok_or("fever case missing")?;
    let r = answer_inquiry(case, corpus.lexicon(), "Does the patient have a fever and headache?");
    ensure(r.verdicts.len() == 2 && !r.needs_clarification, || format!("unexpected response {r:?}"))?;
    let (fever, headache) = (&r.verdicts[0], &r.verdicts[1]);
    ensure(fever.term == "fever" && fever.verdict == Verdict::Present, || format!("first verdict {fever:?}"))?;
    ensure(fever.details.contains("38.5") && fever.details.contains("3 days"), || format!("details {:?}", fever.details))?;
    ensure(headache.term == "headache" && headache.verdict == Verdict::NotInRecord, || format!("second verdict {headache:?}"))?;
    let empty = answer_inquiry(case, corpus.lexicon(), "");
    ensure(
        empty.needs_clarification
            && empty.verdicts.is_empty()
            && empty.clarification_text.as_deref() == Some("Could you please specify the symptom you are inquiring about?"),
        || format!("empty query gave {empty:?}"),
    )?;
    Ok("Present(fever: 38.5, 3 days), NotInRecord(headache), exact clarification".into())
}

pub fn walkthrough() -> Result<String, String> {
    let start = Instant::now();
    let store = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_clinreason");
    let run = |args: &[&str]| {
        Command::new(bin).arg("--store").arg(store.path()).args(args).env_remove("STORE_ROOT").output().map_err(|e| e.to_string())
    };
    let ingest = run(&["ingest", fixtures().join("corpus").to_str().unwrap()])?;
    ensure(ingest.status.success(), || format!("ingest failed: {}", String::from_utf8_lossy(&ingest.stderr)))?;
    let out = store.path().join("walkthrough.tar.gz");
    let script = fixtures().join("scripts/cervical_walkthrough.json");
    let sim = run(&["--clock-seed", "0", "simulate", script.to_str().unwrap(), "--out", out.to_str().unwrap()])?;
    ensure(sim.status.code() == Some(0), || {
        format!("simulate exited {:?}: {}", sim.status.code(), String::from_utf8_lossy(&sim.stderr))
    })?;
    within(Duration::from_secs(5), start)?;

    let bundle = import_bundle(&std::fs::read(&out).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(bundle.manifest.complete, || "bundle is incomplete".into())?;
    let snapshot: Session = serde_json::from_str(bundle.text("session.snapshot").ok_or("no snapshot")?).map_err(|e| e.to_string())?;
    let case = corpus().case("spine-cdh-001").cloned().ok_or("case missing")?;

    for term in ["blackouts", "sudden falls", "dizziness"] {
        let denied = snapshot.transcript.iter().filter_map(|t| t.response.as_ref()).flat_map(|r| &r.verdicts).any(|v| v.term == term && v.verdict == Verdict::Denied);
        ensure(denied, || format!("no Denied verdict for {term}"))?;
    }
    let advanced_at = step_three_end(&bundle)?;
    let expected = [
        ("Cervical Disc Herniation", DiagnosisCategory::MostLikely),
        ("Cervical Spondylosis", DiagnosisCategory::MostLikely),
        ("Stroke", DiagnosisCategory::NeedToRuleOut),
        ("Multiple Sclerosis", DiagnosisCategory::NotLikely),
    ];
    for (label, category) in expected {
        let entry = snapshot.diagnosis_list.iter().find(|e| e.label == label).ok_or_else(|| format!("{label} missing"))?;
        ensure(entry.category_at(advanced_at) == Some(category), || format!("{label} was {:?} at step 3", entry.category_at(advanced_at)))?;
    }
    ensure(snapshot.revealed_packet_ids.first().map(String::as_str) == Some("mri-cervical"), || "MRI not revealed first".into())?;
    let cdh = snapshot.diagnosis_list.iter().find(|e| e.label == "Cervical Disc Herniation").unwrap();
    ensure(cdh.category == DiagnosisCategory::MostLikely && cdh.evidence_refs.iter().any(|r| r.to_string() == "packet:mri-cervical"), || {
        "CDH lacks MRI evidence".into()
    })?;
    let report = snapshot.report.as_ref().ok_or("no report")?;
    let identify = report.section(CrcStep::IdentifyProblems);
    ensure(identify.auto_content.contains(&case.ground_truth.diagnosis), || format!("IdentifyProblems is {:?}", identify.auto_content))?;
    ensure(bundle.text("report.txt").is_some_and(|t| t.contains(&case.ground_truth.diagnosis)), || "report.txt lacks the diagnosis".into())?;
    Ok(format!("exit 0, {} log records, IdentifyProblems names {}", snapshot.next_seq, case.ground_truth.diagnosis))
}

/// Timestamp of the advance out of problem formulation.
fn step_three_end(bundle: &clinreason_core::reporting::ImportedBundle) -> Result<clinreason_core::Timestamp, String> {
    let log = clinreason_core::session::decode_log(bundle.text("actions.log").ok_or("no log")?).map_err(|e| e.to_string())?;
    log.iter()
        .find(|r| matches!(r.action, clinreason_core::session::Action::Advance))
        .map(|r| r.timestamp)
        .ok_or_else(|| "session never advanced".into())
}

pub fn prompting_templates() -> Result<String, String> {
    use clinreason_core::session::{Action, DiagnosisAction};
    let corpus = corpus();
    let case = corpus.case("spine-cdh-001").ok_or("case missing")?;
    let mut s = Session::start(case, &Session::start_record("a1", &case.id, clinreason_core::Timestamp(0))).map_err(|e| e.to_string())?;
    let mut t = 0;
    let mut run = |s: &mut Session, a: Action| -> Result<(), String> {
        t += 1;
        s.execute(case, a, "learner", clinreason_core::Timestamp(t)).map(|_| ()).map_err(|e| e.to_string())
    };
    let q = "Any blackouts or a stiff neck?";
    run(&mut s, Action::Inquiry { text: q.into(), source: clinreason_core::session::InquirySource::Oracle, response: answer_inquiry(case, corpus.lexicon(), q) })?;
    for (label, category) in [("Cervical Disc Herniation", DiagnosisCategory::MostLikely), ("Stroke", DiagnosisCategory::NeedToRuleOut)] {
        run(&mut s, Action::Diagnosis(DiagnosisAction::Add { label: label.into(), category, rationale: String::new() }))?;
    }

    let mut filled = 0;
    let mut empty_cells = Vec::new();
    loop {
        if s.step == Step::DiagnosisAnalysis {
            while s.revealed_packet_ids.len() < case.packets.len() {
                run(&mut s, Action::RequestEvidence)?;
            }
        }
        let prompts = current_prompts(&s, case).map_err(|e| e.to_string())?;
        for factor in FilaFactor::ALL {
            let questions = prompts.get(&factor).ok_or_else(|| format!("{factor:?} missing"))?;
            if questions.is_empty() {
                empty_cells.push((s.step, factor));
            }
            for q in questions {
                ensure(!q.contains('<'), || format!("unfilled slot in {q:?}"))?;
                filled += 1;
            }
        }
        match s.step.next() {
            Some(_) => run(&mut s, Action::Advance)?,
            None => break,
        }
    }
    ensure(empty_cells == [(Step::ProblemFormulation, FilaFactor::LearningIssues)], || format!("empty cells {empty_cells:?}"))?;

    let bindings = SlotBindings::from([(Slot::Symptoms, vec!["neck pain".to_string(), "ulnar numbness".to_string()])]);
    let ideas = instantiate_prompting_question(Step::ProblemFormulation, FilaFactor::Ideas, &bindings).map_err(|e| e.to_string())?;
    ensure(
        ideas == ["Based on the fact that the patient exhibits neck pain, ulnar numbness, what inferences and hypotheses do you have?"],
        || format!("Ideas wording {ideas:?}"),
    )?;
    Ok(format!("11 non-empty cells ({filled} questions), (Step3, LearningIssues) empty, Ideas golden matches"))
}

pub fn rubric() -> Result<String, String> {
    let sheet = |rater: &str, f: &dyn Fn(u32) -> i64| RaterSheet { rater_id: rater.into(), scores: (1..=16).map(|c| (c, f(c))).collect() };
    let agg = aggregate_scores(&[sheet("a", &|_| 5), sheet("b", &|_| 6)]).map_err(|e| e.to_string())?;
    ensure(agg.per_criterion.len() == 16 && agg.per_criterion.values().all(|m| m.to_string() == "5.50"), || {
        format!("per-criterion {:?}", agg.per_criterion.values().map(ToString::to_string).collect::<Vec<_>>())
    })?;
    match aggregate_scores(&[sheet("a", &|_| 5), sheet("c", &|c| if c == 9 { 8 } else { 5 })]) {
        Err(ScoreError::InvalidScore { rater_id, criterion: 9, .. }) if rater_id == "c" => {}
        other => return Err(format!("score 8 gave {other:?}")),
    }

    let mut runner = runner(512);
    let strategy = prop::collection::vec(prop::collection::vec(0i64..=7, 16), 1..6).prop_flat_map(|sheets| {
        let n = sheets.len();
        (Just(sheets), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    });
    runner
        .run(&strategy, |(rows, order)| {
            let sheets: Vec<RaterSheet> =
                rows.iter().enumerate().map(|(i, r)| sheet(&format!("r{i}"), &|c| r[c as usize - 1])).collect();
            let shuffled: Vec<RaterSheet> = order.iter().map(|&i| sheets[i].clone()).collect();
            prop_assert_eq!(aggregate_scores(&sheets).unwrap(), aggregate_scores(&shuffled).unwrap());
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("(5,6) gives 5.50 on all 16 criteria, 8 rejected naming rater and criterion, 512 permutations invariant".into())
}

const FIXED_TEXT: &[&str] = &[
    "You are a medical assistant. Based on the following patient case data, respond to the user's symptom inquiries by adhering to the following guidelines:",
    "    - If the patient's case data includes the mentioned symptom, respond with \"Yes\" and provide relevant details (e.g., severity, duration, related measurements).",
    "    - If the symptom is not present in the case data, respond with \"Irrelevant\".",
    "    - If the user's input is unclear or does not specify a symptom, respond with a clarifying question. For example: \"Could you please specify the symptom you are inquiring about?\"",
    "- User Input: \"Does the patient have a fever and headache?\"",
    "    Fever: Yes",
    "    Relevant Data: Temperature is 38.5°C, duration of 3 days.",
    "    Headache: Irrelevant",
    "Ensure that all responses strictly follow the above guidelines to maintain consistency and reliability.",
];

pub fn prompt_golden() -> Result<String, String> {
    let corpus = corpus();
    let case: &CaseRecord = corpus.case("inf-fever-001").ok_or("case missing")?;
    let first = render_case_prompt(case);
    for line in FIXED_TEXT {
        ensure(first.text.lines().any(|l| l == *line), || format!("missing fixed line {line:?}"))?;
    }
    ensure(first.text.contains("respond with \"Irrelevant\""), || "no Irrelevant instruction".into())?;
    ensure(first.text.contains("Could you please specify the symptom you are inquiring about?"), || "no clarification".into())?;
    for i in 0..100 {
        ensure(render_case_prompt(case) == first, || format!("render {i} differs"))?;
    }
    Ok(format!("{} fixed lines byte-for-byte, 100 identical renders", FIXED_TEXT.len()))
}

struct Scripted(&'static str);

impl CompletionBackend for Scripted {
    fn complete(&self, _: &str, _: &str) -> Result<String, TransportError> {
        Ok(self.0.to_owned())
    }
}

pub fn model_adapter() -> Result<String, String> {
    let corpus = corpus();
    let case = corpus.case("inf-fever-001").ok_or("case missing")?;
    let q = "Does the patient have a fever and headache?";
    let reply = "Fever: Yes \nRelevant Data: Temperature is 38.5°C, duration of 3 days. \n\nHeadache: Irrelevant \n";
    let oracle = answer_inquiry(case, corpus.lexicon(), q);
    let model = model_answer(&ModelAdapter::with_backend(Scripted(reply)), case, corpus.lexicon(), q).map_err(|e| e.to_string())?;
    ensure(model == oracle, || format!("model {model:?} != oracle {oracle:?}"))?;
    let report = reconcile_with_oracle(&model, &oracle);
    ensure(report.disagreements.is_empty(), || format!("disagreements {:?}", report.disagreements))?;
    let prose = model_answer(&ModelAdapter::with_backend(Scripted("The patient seems to have a fever, I think.")), case, corpus.lexicon(), q);
    ensure(matches!(prose, Err(AdapterError::Parse(_))), || format!("prose gave {prose:?}"))?;
    Ok("scripted reply equals oracle, empty disagreement report, prose is a ParseError, no network".into())
}
