//! File-backed corpus and session store.
//!
//! Layout under the store root:
//!
//! ```text
//! corpus/manifest.json
//! corpus/cases/<case id>.json
//! corpus/images/...
//! sessions/<session id>/actions.log
//! sessions/<session id>/session.snapshot
//! ```
//!
//! The action log is the source of truth. Snapshots are derived and rewritten
//! after every commit; on open every log is replayed and stale snapshots are
//! replaced.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use clinreason_core::case::{serialize_case, Manifest, PacketBody, TaxonomyNode, MANIFEST_FILE};
use clinreason_core::inquiry::{answer_inquiry, model_answer, reconcile_with_oracle, ConsistencyReport, InquiryResponse, ModelAdapter};
use clinreason_core::reporting::{export_bundle, sha256_hex};
use clinreason_core::session::{decode_log, encode_record, Action, ActionRecord, InquirySource, Outcome};
use clinreason_core::{CaseRecord, Clock, Corpus, Session};
use serde::Serialize;

use crate::StoreError;

pub const LOG_FILE: &str = "actions.log";
pub const SNAPSHOT_FILE: &str = "session.snapshot";

type Result<T> = std::result::Result<T, StoreError>;

/// Directories backing a store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreRoot {
    pub corpus_dir: PathBuf,
    pub sessions_dir: PathBuf,
}

impl StoreRoot {
    /// `corpus/` and `sessions/` under `root`.
    pub fn at(root: &Path) -> Self {
        Self { corpus_dir: root.join("corpus"), sessions_dir: root.join("sessions") }
    }
}

struct Writer {
    session: Session,
    log: Vec<ActionRecord>,
    file: File,
}

struct Slot {
    /// Held for the whole commit; serializes writers of one session.
    writer: Mutex<Writer>,
    /// Latest committed state, for readers.
    current: RwLock<Arc<Session>>,
}

/// Result of a symptom inquiry commit.
#[derive(Debug, Clone, Serialize)]
pub struct InquiryResult {
    pub response: InquiryResponse,
    pub source: InquirySource,
    /// Model answers are checked against the oracle.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistency: Option<ConsistencyReport>,
    #[serde(skip)]
    pub session: Arc<Session>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestSummary {
    pub added: Vec<String>,
    pub replaced: Vec<String>,
    pub unchanged: Vec<String>,
}

pub struct Store {
    root: StoreRoot,
    clock: Arc<dyn Clock>,
    adapter: ModelAdapter,
    corpus: RwLock<Arc<Corpus>>,
    sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
    /// Serializes ingestion and session creation.
    admin: Mutex<u64>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(StoreError::storage(&tmp))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(StoreError::storage(&tmp))?;
    fs::rename(&tmp, path).map_err(StoreError::storage(path))
}

fn session_number(id: &str) -> Option<u64> {
    id.strip_prefix('s')?.parse().ok()
}

impl Store {
    /// Opens (creating directories as needed) and replays every session.
    pub fn open(root: StoreRoot, clock: Arc<dyn Clock>, adapter: ModelAdapter) -> Result<Store> {
        for dir in [&root.corpus_dir, &root.sessions_dir] {
            fs::create_dir_all(dir).map_err(StoreError::storage(dir))?;
        }
        let corpus = if root.corpus_dir.join(MANIFEST_FILE).exists() {
            Corpus::load(&root.corpus_dir)?
        } else {
            Corpus::default()
        };

        let mut sessions = BTreeMap::new();
        let mut last = 0;
        let mut dirs: Vec<PathBuf> = fs::read_dir(&root.sessions_dir)
            .map_err(StoreError::storage(&root.sessions_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join(LOG_FILE).is_file())
            .collect();
        dirs.sort();
        for dir in dirs {
            let (session, log, file) = replay_dir(&dir, &corpus)?;
            last = last.max(session_number(&session.id).unwrap_or(0));
            let slot = Slot { current: RwLock::new(Arc::new(session.clone())), writer: Mutex::new(Writer { session, log, file }) };
            let id = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_owned();
            sessions.insert(id, Arc::new(slot));
        }

        Ok(Store {
            root,
            clock,
            adapter,
            corpus: RwLock::new(Arc::new(corpus)),
            sessions: RwLock::new(sessions),
            admin: Mutex::new(last),
        })
    }

    pub fn root(&self) -> &StoreRoot {
        &self.root
    }

    pub fn model_enabled(&self) -> bool {
        self.adapter.is_enabled()
    }

    /// The current corpus snapshot.
    pub fn corpus(&self) -> Arc<Corpus> {
        self.corpus.read().expect("corpus lock").clone()
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().expect("session map lock").keys().cloned().collect()
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(format!("session `{id}`")))
    }

    /// Latest committed snapshot.
    pub fn session(&self, id: &str) -> Result<Arc<Session>> {
        Ok(self.slot(id)?.current.read().expect("snapshot lock").clone())
    }

    pub fn log(&self, id: &str) -> Result<Vec<ActionRecord>> {
        Ok(self.slot(id)?.writer.lock().expect("writer lock").log.clone())
    }

    fn case(&self, id: &str) -> Result<(Arc<Corpus>, CaseRecord)> {
        let corpus = self.corpus();
        let case = corpus.case(id).cloned().ok_or_else(|| StoreError::NotFound(format!("case `{id}`")))?;
        Ok((corpus, case))
    }

    /// Creates a session with the next sequential id (`s000001`, ...).
    pub fn start_session(&self, case_id: &str) -> Result<Arc<Session>> {
        let (_, case) = self.case(case_id)?;
        let mut last = self.admin.lock().expect("admin lock");
        let id = format!("s{:06}", *last + 1);
        let dir = self.root.sessions_dir.join(&id);
        fs::create_dir_all(&dir).map_err(StoreError::storage(&dir))?;

        let record = Session::start_record(&id, &case.id, self.clock.now());
        let session = Session::start(&case, &record)?;
        let log_path = dir.join(LOG_FILE);
        let mut file = OpenOptions::new().create(true).append(true).open(&log_path).map_err(StoreError::storage(&log_path))?;
        append(&mut file, &log_path, &record)?;
        write_atomic(&dir.join(SNAPSHOT_FILE), session.snapshot_json().as_bytes())?;
        *last += 1;

        let current = Arc::new(session.clone());
        let slot = Slot { current: RwLock::new(current.clone()), writer: Mutex::new(Writer { session, log: vec![record], file }) };
        self.sessions.write().expect("session map lock").insert(id, Arc::new(slot));
        Ok(current)
    }

    /// Applies `action`, appends it to the log (fsync'd) and publishes the
    /// new snapshot. Commits to one session are serialized.
    pub fn commit(&self, session_id: &str, action: Action, actor: &str) -> Result<(Arc<Session>, Outcome)> {
        let slot = self.slot(session_id)?;
        let mut w = slot.writer.lock().expect("writer lock");
        let (_, case) = self.case(&w.session.case_id)?;

        let mut next = w.session.clone();
        let (record, outcome) = next.execute(&case, action, actor, self.clock.now())?;
        let dir = self.root.sessions_dir.join(session_id);
        let log_path = dir.join(LOG_FILE);
        append(&mut w.file, &log_path, &record)?;
        w.log.push(record);
        w.session = next;
        // The record is durable at this point. A failed snapshot write leaves
        // a stale snapshot that the next open rebuilds from the log.
        let _ = write_atomic(&dir.join(SNAPSHOT_FILE), w.session.snapshot_json().as_bytes());

        let current = Arc::new(w.session.clone());
        *slot.current.write().expect("snapshot lock") = current.clone();
        Ok((current, outcome))
    }

    /// Answers a question with the oracle, or with the model adapter when
    /// `use_model` is set, and records it.
    pub fn inquire(&self, session_id: &str, text: &str, use_model: bool, actor: &str) -> Result<InquiryResult> {
        let case_id = self.session(session_id)?.case_id.clone();
        let (corpus, case) = self.case(&case_id)?;
        let oracle = answer_inquiry(&case, corpus.lexicon(), text);
        let (response, source, consistency) = if use_model {
            if !self.adapter.is_enabled() {
                return Err(StoreError::OracleOnly);
            }
            let model = model_answer(&self.adapter, &case, corpus.lexicon(), text)?;
            let report = reconcile_with_oracle(&model, &oracle);
            (model, InquirySource::Model, Some(report))
        } else {
            (oracle, InquirySource::Oracle, None)
        };
        let action = Action::Inquiry { text: text.to_owned(), source, response: response.clone() };
        let (session, _) = self.commit(session_id, action, actor)?;
        Ok(InquiryResult { response, source, consistency, session })
    }

    /// Bytes of a case image, if present and matching its recorded hash.
    pub fn image(&self, case: &CaseRecord, path: &str) -> Option<Vec<u8>> {
        let expected = case.packets.iter().find_map(|p| match &p.body {
            PacketBody::ImagingStudy { image, .. } if image.path == path => Some(image.sha256.clone()),
            _ => None,
        })?;
        let bytes = fs::read(self.root.corpus_dir.join(path)).ok()?;
        (sha256_hex(&bytes) == expected.to_ascii_lowercase()).then_some(bytes)
    }

    pub fn export(&self, session_id: &str) -> Result<Vec<u8>> {
        let slot = self.slot(session_id)?;
        let w = slot.writer.lock().expect("writer lock");
        let (_, case) = self.case(&w.session.case_id)?;
        Ok(export_bundle(&w.session, &w.log, &case, &|p| self.image(&case, p)))
    }

    /// Installs cases, taxonomy nodes and image files: either every case is
    /// accepted and the new corpus published, or the corpus is unchanged.
    /// `images` maps corpus-relative paths to bytes; each must be referenced
    /// by an ingested case and match its recorded hash.
    pub fn ingest(
        &self,
        taxonomy: Vec<TaxonomyNode>,
        cases: Vec<CaseRecord>,
        images: BTreeMap<String, Vec<u8>>,
    ) -> Result<IngestSummary> {
        let _guard = self.admin.lock().expect("admin lock");
        let current = self.corpus();

        let mut nodes: Vec<TaxonomyNode> = current.taxonomy().to_vec();
        for node in taxonomy {
            match nodes.iter_mut().find(|n| n.id == node.id) {
                Some(existing) if existing.label != node.label => {
                    return Err(StoreError::BadRequest(format!(
                        "taxonomy node `{}` is already labelled `{}`",
                        node.id, existing.label
                    )));
                }
                Some(existing) => {
                    for child in node.children {
                        if !existing.children.contains(&child) {
                            existing.children.push(child);
                        }
                    }
                }
                None => nodes.push(node),
            }
        }

        let in_use: Vec<String> = self
            .sessions
            .read()
            .expect("session map lock")
            .values()
            .map(|s| s.current.read().expect("snapshot lock").case_id.clone())
            .collect();
        let mut summary = IngestSummary { added: vec![], replaced: vec![], unchanged: vec![] };
        let mut merged: BTreeMap<String, CaseRecord> = current.cases().map(|c| (c.id.clone(), c.clone())).collect();
        for case in cases {
            match merged.get(&case.id) {
                Some(old) if *old == case => summary.unchanged.push(case.id.clone()),
                Some(_) if in_use.contains(&case.id) => return Err(StoreError::CaseInUse(case.id)),
                Some(_) => summary.replaced.push(case.id.clone()),
                None => summary.added.push(case.id.clone()),
            }
            merged.insert(case.id.clone(), case);
        }
        let next = Corpus::new(nodes.clone(), merged.into_values().collect())?;
        for (path, bytes) in &images {
            let expected = next.cases().flat_map(|c| &c.packets).find_map(|p| match &p.body {
                PacketBody::ImagingStudy { image, .. } if image.path == *path => Some(image.sha256.to_ascii_lowercase()),
                _ => None,
            });
            match expected {
                None => return Err(StoreError::BadRequest(format!("image `{path}` is not referenced by any case"))),
                Some(h) if h != sha256_hex(bytes) => {
                    return Err(StoreError::BadRequest(format!("image `{path}` does not match its recorded hash")))
                }
                Some(_) => {}
            }
        }
        for (path, bytes) in &images {
            let target = self.root.corpus_dir.join(path);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent).map_err(StoreError::storage(parent))?;
            }
            write_atomic(&target, bytes)?;
        }

        let cases_dir = self.root.corpus_dir.join("cases");
        fs::create_dir_all(&cases_dir).map_err(StoreError::storage(&cases_dir))?;
        for id in summary.added.iter().chain(&summary.replaced) {
            let case = next.case(id).expect("just inserted");
            write_atomic(&cases_dir.join(format!("{id}.json")), serialize_case(case).as_bytes())?;
        }
        let manifest = Manifest { taxonomy: nodes, cases: next.cases().map(|c| format!("cases/{}.json", c.id)).collect() };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write_atomic(&self.root.corpus_dir.join(MANIFEST_FILE), text.as_bytes())?;

        *self.corpus.write().expect("corpus lock") = Arc::new(next);
        Ok(summary)
    }
}

/// Appends one record and syncs it. On failure the file is cut back to its
/// previous length so no partial line is left behind.
fn append(file: &mut File, path: &Path, record: &ActionRecord) -> Result<()> {
    let len = file.metadata().map_err(StoreError::storage(path))?.len();
    let written = file.write_all(encode_record(record).as_bytes()).and_then(|_| file.sync_data());
    if let Err(e) = written {
        let _ = file.set_len(len);
        return Err(StoreError::Storage { path: path.to_owned(), source: e });
    }
    Ok(())
}

/// Replays one session directory. A trailing partial line (a write that
/// never completed, hence never acknowledged) is truncated away.
fn replay_dir(dir: &Path, corpus: &Corpus) -> Result<(Session, Vec<ActionRecord>, File)> {
    let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_owned();
    let log_path = dir.join(LOG_FILE);
    let mut text = fs::read_to_string(&log_path).map_err(StoreError::storage(&log_path))?;
    if !text.is_empty() && !text.ends_with('\n') {
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        text.truncate(keep);
        let f = OpenOptions::new().write(true).open(&log_path).map_err(StoreError::storage(&log_path))?;
        f.set_len(keep as u64).and_then(|_| f.sync_all()).map_err(StoreError::storage(&log_path))?;
    }
    let replay_err = |seq: u64, message: String| StoreError::Replay { session: name.clone(), seq, message };

    let records = decode_log(&text).map_err(|e| replay_err(e.seq, e.message.clone()))?;
    let Some(Action::Start { session_id, case_id }) = records.first().map(|r| &r.action) else {
        return Err(replay_err(0, "log does not begin with a start record".into()));
    };
    if *session_id != name {
        return Err(replay_err(0, format!("log belongs to session `{session_id}`")));
    }
    let case = corpus.case(case_id).ok_or_else(|| replay_err(0, format!("case `{case_id}` is not in the corpus")))?;

    let mut session = Session::start(case, &records[0]).map_err(|e| replay_err(0, e.to_string()))?;
    for r in &records[1..] {
        session.apply(case, r).map_err(|e| replay_err(r.seq, e.to_string()))?;
    }

    let snapshot_path = dir.join(SNAPSHOT_FILE);
    let snapshot = session.snapshot_json();
    if fs::read_to_string(&snapshot_path).ok().as_deref() != Some(snapshot.as_str()) {
        write_atomic(&snapshot_path, snapshot.as_bytes())?;
    }
    let file = OpenOptions::new().append(true).open(&log_path).map_err(StoreError::storage(&log_path))?;
    Ok((session, records, file))
}
