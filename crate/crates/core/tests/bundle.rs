use std::path::PathBuf;

use clinreason_core::inquiry::answer_inquiry;
use clinreason_core::reporting::{export_bundle, import_bundle, BundleError, CrcStep};
use clinreason_core::session::{decode_log, Action, ActionRecord, DiagnosisAction, DiagnosisCategory, EvidenceRef, InquirySource};
use clinreason_core::{CaseRecord, Corpus, Session, Timestamp};

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus")
}

fn images(path: &str) -> Option<Vec<u8>> {
    std::fs::read(corpus_dir().join(path)).ok()
}

fn play(case: &CaseRecord, corpus: &Corpus, actions: Vec<Action>) -> (Session, Vec<ActionRecord>) {
    let mut log = vec![Session::start_record("s000001", &case.id, Timestamp(1_000))];
    let mut s = Session::start(case, &log[0]).unwrap();
    for (i, a) in actions.into_iter().enumerate() {
        let a = match a {
            Action::Inquiry { text, source, .. } => {
                let response = answer_inquiry(case, corpus.lexicon(), &text);
                Action::Inquiry { text, source, response }
            }
            other => other,
        };
        let (r, _) = s.execute(case, a, "learner", Timestamp(2_000 + 1_000 * i as i64)).unwrap();
        log.push(r);
    }
    (s, log)
}

fn ask(text: &str) -> Action {
    Action::Inquiry { text: text.into(), source: InquirySource::Oracle, response: clinreason_core::inquiry::InquiryResponse::clarification() }
}

fn add(label: &str, category: DiagnosisCategory) -> Action {
    Action::Diagnosis(DiagnosisAction::Add { label: label.into(), category, rationale: "initial impression".into() })
}

fn full_walkthrough() -> Vec<Action> {
    vec![
        ask("Any blackouts?"),
        add("Cervical Disc Herniation", DiagnosisCategory::MostLikely),
        add("Stroke", DiagnosisCategory::NeedToRuleOut),
        Action::Advance,
        Action::RequestEvidence,
        Action::Diagnosis(DiagnosisAction::AttachEvidence { entry: "dx1".into(), reference: EvidenceRef::Packet { id: "mri-cervical".into() } }),
        Action::RequestEvidence,
        Action::Advance,
        Action::Diagnosis(DiagnosisAction::Move { entry: "dx2".into(), new_category: DiagnosisCategory::NotLikely, note: "MRI explains it".into() }),
        Action::GenerateReport,
    ]
}

#[test]
fn export_import_reexport_is_identical() {
    let corpus = Corpus::load(&corpus_dir()).unwrap();
    let case = corpus.case("spine-cdh-001").unwrap();
    let (session, log) = play(case, &corpus, full_walkthrough());
    let bytes = export_bundle(&session, &log, case, &images);
    assert_eq!(bytes, export_bundle(&session, &log, case, &images));

    let imported = import_bundle(&bytes).unwrap();
    let m = &imported.manifest;
    assert!(m.complete);
    assert_eq!(m.post_reveal_edits, 1);
    assert!(m.missing_images.is_empty());
    assert!(m.entries.len() >= 6);
    for name in ["actions.log", "session.snapshot", "report.struct", "report.txt", "mindmap.struct", "diagnosis_history.struct"] {
        assert!(imported.files.contains_key(name), "missing {name}");
    }
    assert_eq!(imported.files["images/cervical_mri.png"], images("images/cervical_mri.png").unwrap());

    let relog = decode_log(imported.text("actions.log").unwrap()).unwrap();
    let replayed = Session::replay(case, &relog).unwrap();
    assert_eq!(imported.text("session.snapshot").unwrap(), replayed.snapshot_json());
    assert_eq!(export_bundle(&replayed, &relog, case, &images), bytes);

    let report = replayed.report.unwrap();
    assert!(report.section(CrcStep::IdentifyProblems).auto_content.contains("Cervical Disc Herniation"));
}

#[test]
fn early_session_is_incomplete() {
    let corpus = Corpus::load(&corpus_dir()).unwrap();
    let case = corpus.case("spine-cdh-001").unwrap();
    let (session, log) = play(case, &corpus, vec![ask("neck pain?")]);
    let imported = import_bundle(&export_bundle(&session, &log, case, &images)).unwrap();
    assert!(!imported.manifest.complete);
    assert!(!imported.files.contains_key("report.struct"));
    assert!(!imported.files.contains_key("report.txt"));
}

#[test]
fn missing_image_is_listed() {
    let corpus = Corpus::load(&corpus_dir()).unwrap();
    let case = corpus.case("spine-cdh-001").unwrap();
    let (session, log) = play(case, &corpus, full_walkthrough());
    let imported = import_bundle(&export_bundle(&session, &log, case, &|_| None)).unwrap();
    assert_eq!(imported.manifest.missing_images, ["images/cervical_mri.png"]);
}

#[test]
fn tampering_detected() {
    let corpus = Corpus::load(&corpus_dir()).unwrap();
    let case = corpus.case("spine-cdh-001").unwrap();
    let (session, log) = play(case, &corpus, full_walkthrough());
    let bytes = export_bundle(&session, &log, case, &images);
    let mut imported = import_bundle(&bytes).unwrap();

    // Rebuild an archive with one altered entry but the original manifest.
    let mut builder = tar::Builder::new(Vec::new());
    let manifest = serde_json::to_vec_pretty(&imported.manifest).unwrap();
    imported.files.get_mut("report.txt").unwrap().extend_from_slice(b"forged");
    let entries = std::iter::once(("manifest".to_string(), manifest)).chain(imported.files.clone());
    for (name, data) in entries {
        let mut h = tar::Header::new_gnu();
        h.set_size(data.len() as u64);
        h.set_mode(0o644);
        h.set_cksum();
        builder.append_data(&mut h, &name, data.as_slice()).unwrap();
    }
    let tarball = builder.into_inner().unwrap();
    let mut gz = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    std::io::Write::write_all(&mut gz, &tarball).unwrap();
    let forged = gz.finish().unwrap();
    assert!(matches!(import_bundle(&forged), Err(BundleError::HashMismatch(n)) if n == "report.txt"));
    assert!(import_bundle(b"not a bundle").is_err());
}
