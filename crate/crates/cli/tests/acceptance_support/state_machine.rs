use std::cell::Cell;
use std::fs;
use std::sync::Arc;

use clinreason_core::reporting::CrcStep;
use clinreason_core::session::{
    Action, Annotation, DiagnosisAction, DiagnosisCategory, EvidenceRef, FilaFactor, MindMapAction, Shape, Step,
};
use clinreason_core::{FixedStepClock, Session, SessionError};
use clinreason_core::inquiry::ModelAdapter;
use clinreason_service::api::ACTOR;
use clinreason_service::{Store, StoreError, StoreRoot, SNAPSHOT_FILE};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Op {
    Ask(usize),
    Advance,
    Reveal,
    Add(usize, usize),
    Move(usize, usize),
    Attach(usize, usize),
    Remove(usize),
    Node(usize),
    EditNode(usize),
    DropNode(usize),
    Annotate(usize),
    Report,
    EditReport(usize),
}

const QUESTIONS: &[&str] = &["any fever?", "blackouts or vertigo?", "neck stiffness", "how are you", "cough and chills", ""];
const LABELS: &[&str] = &["Cervical Disc Herniation", "Stroke", "Pneumonia", "Migraine"];

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        2 => (0..QUESTIONS.len()).prop_map(Op::Ask),
        3 => Just(Op::Advance),
        3 => Just(Op::Reveal),
        3 => (0..LABELS.len(), 0..3usize).prop_map(|(l, c)| Op::Add(l, c)),
        3 => (0..6usize, 0..3usize).prop_map(|(e, c)| Op::Move(e, c)),
        1 => (0..6usize, 0..4usize).prop_map(|(e, p)| Op::Attach(e, p)),
        1 => (0..6usize).prop_map(Op::Remove),
        1 => (0..4usize).prop_map(Op::Node),
        1 => (0..6usize).prop_map(Op::EditNode),
        1 => (0..6usize).prop_map(Op::DropNode),
        1 => (0..4usize).prop_map(Op::Annotate),
        1 => Just(Op::Report),
        1 => (0..CrcStep::ALL.len()).prop_map(Op::EditReport),
    ]
}

fn to_action(op: &Op, order: &[String]) -> Option<Action> {
    let packet = |i: usize| order.get(i).cloned().unwrap_or_else(|| "no-such-packet".into());
    let entry = |i: usize| format!("dx{}", i + 1);
    Some(match *op {
        Op::Ask(_) => return None,
        Op::Advance => Action::Advance,
        Op::Reveal => Action::RequestEvidence,
        Op::Add(l, c) => Action::Diagnosis(DiagnosisAction::Add {
            label: LABELS[l].into(),
            category: DiagnosisCategory::ALL[c],
            rationale: "r".into(),
        }),
        Op::Move(e, c) => {
            Action::Diagnosis(DiagnosisAction::Move { entry: entry(e), new_category: DiagnosisCategory::ALL[c], note: "n".into() })
        }
        Op::Attach(e, p) => {
            Action::Diagnosis(DiagnosisAction::AttachEvidence { entry: entry(e), reference: EvidenceRef::Packet { id: packet(p) } })
        }
        Op::Remove(e) => Action::Diagnosis(DiagnosisAction::Remove { entry: entry(e), note: "gone".into() }),
        Op::Node(f) => Action::Mindmap(MindMapAction::AddNode { factor: FilaFactor::ALL[f], text: "note".into(), source_ref: None }),
        Op::EditNode(n) => Action::Mindmap(MindMapAction::EditNode { id: format!("n{}", n + 1), text: "edited".into() }),
        Op::DropNode(n) => Action::Mindmap(MindMapAction::RemoveNode { id: format!("n{}", n + 1) }),
        Op::Annotate(p) => Action::Annotate(Annotation {
            packet_id: packet(p),
            shape: Shape::Rectangle { x: 0.1, y: 0.2, w: 0.3, h: 0.4 },
            label: "lesion".into(),
            note: String::new(),
        }),
        Op::Report => Action::GenerateReport,
        Op::EditReport(s) => Action::EditReport { section: CrcStep::ALL[s], text: "revised".into() },
    })
}

fn run(store: &Store, case_id: &str, ops: &[Op], counts: &Counts) -> Result<(), TestCaseError> {
    let corpus = store.corpus();
    let case = corpus.case(case_id).expect("fixture case");
    let order: Vec<String> = case.packets_in_reveal_order().iter().map(|p| p.id.clone()).collect();
    let id = store.start_session(case_id).map_err(|e| TestCaseError::fail(e.to_string()))?.id.clone();

    for op in ops {
        let before = store.session(&id).expect("live session");
        let action = to_action(op, &order);
        let same_category_move = match &action {
            Some(Action::Diagnosis(DiagnosisAction::Move { entry, new_category, .. })) => {
                before.entry(entry).is_some_and(|e| !e.removed && e.category == *new_category)
            }
            _ => false,
        };
        let result = match (op, action) {
            (Op::Ask(q), _) => store.inquire(&id, QUESTIONS[*q], false, ACTOR).map(|_| ()),
            (_, Some(action)) => store.commit(&id, action, ACTOR).map(|_| ()),
            (_, None) => unreachable!(),
        };
        let after = store.session(&id).expect("live session");
        counts.actions.set(counts.actions.get() + 1);
        match result {
            Ok(()) => {
                prop_assert!(!same_category_move, "same-category move accepted");
                prop_assert_eq!(after.next_seq, before.next_seq + 1);
            }
            Err(e) => {
                counts.rejected.set(counts.rejected.get() + 1);
                if same_category_move {
                    prop_assert!(matches!(e, StoreError::Session(SessionError::NoOpMove)), "expected NoOpMove, got {e:?}");
                    counts.noop_moves.set(counts.noop_moves.get() + 1);
                }
                prop_assert_eq!(after.snapshot_json(), before.snapshot_json(), "failed action changed state");
            }
        }
        prop_assert!(after.step >= before.step, "step went backwards");
        prop_assert!(after.step as u8 <= before.step as u8 + 1, "step skipped");
        prop_assert_eq!(&after.revealed_packet_ids[..], &order[..after.revealed_packet_ids.len()]);
        if after.step == Step::PrognosisReflection {
            prop_assert_eq!(after.revealed_packet_ids.len(), order.len());
        }
        let log = store.log(&id).expect("session log");
        let replayed = Session::replay(case, &log).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(replayed.snapshot_json(), after.snapshot_json(), "replay diverged");
    }
    Ok(())
}

#[derive(Default)]
struct Counts {
    actions: Cell<usize>,
    rejected: Cell<usize>,
    noop_moves: Cell<usize>,
}

fn open(root: &StoreRoot) -> Result<Store, String> {
    Store::open(root.clone(), Arc::new(FixedStepClock::seeded(0)), ModelAdapter::disabled()).map_err(|e| e.to_string())
}

pub fn state_machine() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = StoreRoot::at(dir.path());
    let fixture = super::corpus();
    let case_ids: Vec<String> = fixture.cases().map(|c| c.id.clone()).collect();
    let store = open(&root)?;
    store
        .ingest(fixture.taxonomy().to_vec(), fixture.cases().cloned().collect(), Default::default())
        .map_err(|e| e.to_string())?;

    let counts = Counts::default();
    let sequences = Cell::new(0usize);
    let mut runner = super::runner(1000);
    let strategy = (0..case_ids.len(), prop::collection::vec(op(), 0..30));
    runner
        .run(&strategy, |(c, ops)| {
            sequences.set(sequences.get() + 1);
            run(&store, &case_ids[c], &ops, &counts)
        })
        .map_err(|e| e.to_string())?;

    let live: Vec<(String, String)> =
        store.session_ids().into_iter().map(|id| (store.session(&id).expect("live").snapshot_json(), id)).collect();
    drop(store);
    let reopened = open(&root)?;
    super::ensure(reopened.session_ids().len() == live.len(), || {
        format!("{} sessions before restart, {} after", live.len(), reopened.session_ids().len())
    })?;
    for (snapshot, id) in &live {
        let restored = reopened.session(id).map_err(|e| format!("{id}: {e}"))?.snapshot_json();
        super::ensure(&restored == snapshot, || format!("{id}: snapshot differs after restart"))?;
        let on_disk = fs::read_to_string(root.sessions_dir.join(id).join(SNAPSHOT_FILE)).map_err(|e| format!("{id}: {e}"))?;
        super::ensure(&on_disk == snapshot, || format!("{id}: on-disk snapshot differs"))?;
    }

    super::ensure(sequences.get() >= 1000, || format!("only {} sequences ran", sequences.get()))?;
    Ok(format!(
        "{} sequences, {} actions ({} rejected, {} same-category moves), {} sessions identical after restart",
        sequences.get(),
        counts.actions.get(),
        counts.rejected.get(),
        counts.noop_moves.get(),
        live.len()
    ))
}
