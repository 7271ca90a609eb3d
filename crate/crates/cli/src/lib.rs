//! Operator entry point: corpus ingestion and validation, difficulty reports,
//! scripted session simulation, rubric scoring, bundle export and serving.
//!
//! Every subcommand prints a human-readable table by default and one JSON
//! record per line with `--json`.

pub mod script;

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use clinreason_core::case::{
    parse_case, parse_manifest, CaseError, CaseRecord, Corpus, CorpusError, PacketBody, TaxonomyNode, Violation,
    MANIFEST_FILE,
};
use clinreason_core::difficulty::profile_case;
use clinreason_core::inquiry::ModelAdapter;
use clinreason_core::reporting::{aggregate_scores, parse_rater_sheet, sha256_hex, AggregateScore, CrcStep, RaterSheet};
use clinreason_core::session::Action;
use clinreason_core::{Clock, FixedStepClock, SystemClock};
use clinreason_service::api::ACTOR;
use clinreason_service::{ServiceConfig, Store, StoreError, StoreRoot, DEFAULT_STORE_ROOT};
use serde_json::{json, Value};

use crate::script::{parse_script, run_script, RunError};

pub const EXIT_OK: u8 = 0;
/// Invalid input, failed expectation or rejected operation.
pub const EXIT_FAILURE: u8 = 1;
/// Unreadable input, storage failure or unusable store.
pub const EXIT_IO: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "clinreason", version, about = "Clinical reasoning case trainer tools")]
pub struct Cli {
    /// Store root holding the corpus and session logs.
    #[arg(long, global = true, env = "STORE_ROOT", default_value = DEFAULT_STORE_ROOT)]
    pub store: PathBuf,
    /// One JSON record per output line.
    #[arg(long, global = true)]
    pub json: bool,
    /// Use a fixed clock starting at this many milliseconds since the epoch.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub clock_seed: Option<i64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate cases and install them into the store corpus.
    Ingest {
        /// Corpus directories, manifest files or single case files.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Validate cases without installing them.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Print difficulty profiles for stored cases or case files.
    Classify {
        /// Case ids or case file paths; all stored cases when omitted.
        cases: Vec<String>,
    },
    /// Rank stored cases by matched keywords.
    Search {
        #[arg(default_value = "")]
        query: String,
        /// Taxonomy path prefix, segments separated by '/'.
        #[arg(long)]
        path: Option<String>,
    },
    /// Run a simulation script and write the session bundle.
    Simulate {
        script: PathBuf,
        /// Bundle path; defaults to `<store>/exports/<session>.tar.gz`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate rater sheets for a report.
    Score {
        report_id: String,
        #[arg(required = true)]
        sheets: Vec<PathBuf>,
    },
    /// Write the export bundle of a stored session.
    Export {
        session_id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        /// Overrides LISTEN_ADDR.
        #[arg(long)]
        listen: Option<String>,
    },
}

struct Output<'a> {
    json: bool,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Output<'_> {
    /// Writes `record` in JSON mode, `human` otherwise.
    fn emit(&mut self, record: Value, human: impl FnOnce() -> String) {
        let _ = if self.json { writeln!(self.out, "{record}") } else { writeln!(self.out, "{}", human()) };
    }

    fn error(&mut self, message: impl std::fmt::Display) {
        let _ = writeln!(self.err, "error: {message}");
    }
}

/// Runs one parsed command, returning the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let mut o = Output { json: cli.json, out, err };
    let clock: Arc<dyn Clock> = match cli.clock_seed {
        Some(seed) => Arc::new(FixedStepClock::seeded(seed)),
        None => Arc::new(SystemClock),
    };
    let ctx = Ctx { store: cli.store, clock };
    match cli.command {
        Command::Ingest { paths } => ingest(&ctx, &paths, true, &mut o),
        Command::Validate { paths } => ingest(&ctx, &paths, false, &mut o),
        Command::Classify { cases } => classify(&ctx, &cases, &mut o),
        Command::Search { query, path } => search(&ctx, &query, path.as_deref(), &mut o),
        Command::Simulate { script, out } => simulate(&ctx, &script, out, &mut o),
        Command::Score { report_id, sheets } => score(&ctx, &report_id, &sheets, &mut o),
        Command::Export { session_id, out } => export(&ctx, &session_id, out, &mut o),
        Command::Serve { listen } => serve(&ctx, listen, &mut o),
    }
}

struct Ctx {
    store: PathBuf,
    clock: Arc<dyn Clock>,
}

impl Ctx {
    fn root(&self) -> StoreRoot {
        StoreRoot::at(&self.store)
    }

    fn open(&self, o: &mut Output) -> Option<Store> {
        match Store::open(self.root(), self.clock.clone(), ModelAdapter::disabled()) {
            Ok(store) => Some(store),
            Err(e) => {
                o.error(format_args!("cannot open store {}: {e}", self.store.display()));
                None
            }
        }
    }
}

fn exit_for(e: &StoreError) -> u8 {
    match e {
        StoreError::Storage { .. } | StoreError::Replay { .. } => EXIT_IO,
        StoreError::Corpus(CorpusError::Io { .. }) => EXIT_IO,
        _ => EXIT_FAILURE,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)
}

/// Cases read from the command-line inputs, each with its source.
#[derive(Default)]
struct Inputs {
    taxonomy: Vec<TaxonomyNode>,
    cases: Vec<(String, Result<CaseRecord, CaseError>)>,
    manifest_errors: Vec<(String, CorpusError)>,
    images: BTreeMap<String, Vec<u8>>,
    missing_images: Vec<String>,
}

impl Inputs {
    /// Parses a case and picks up the images it references, looking in each
    /// of `bases` in turn.
    fn add_case(&mut self, source: String, text: &str, bases: &[&Path]) {
        let case = parse_case(text).and_then(|case| {
            let mut mismatched = Vec::new();
            for (i, packet) in case.packets.iter().enumerate() {
                let PacketBody::ImagingStudy { image, .. } = &packet.body else { continue };
                let Some(bytes) = bases.iter().find_map(|b| std::fs::read(b.join(&image.path)).ok()) else {
                    self.missing_images.push(format!("{} ({})", image.path, case.id));
                    continue;
                };
                if sha256_hex(&bytes) != image.sha256.to_ascii_lowercase() {
                    mismatched.push(Violation {
                        rule: "packet.image-hash-mismatch",
                        path: format!("packets[{i}].body.image"),
                        message: format!("{} does not match its recorded hash", image.path),
                    });
                } else {
                    self.images.insert(image.path.clone(), bytes);
                }
            }
            if mismatched.is_empty() {
                Ok(case)
            } else {
                Err(CaseError::Value(mismatched))
            }
        });
        self.cases.push((source, case));
    }
}

fn read(path: &Path) -> Result<String, (PathBuf, io::Error)> {
    std::fs::read_to_string(path).map_err(|e| (path.to_owned(), e))
}

fn load_inputs(paths: &[PathBuf]) -> Result<Inputs, (PathBuf, io::Error)> {
    let mut inputs = Inputs::default();
    for path in paths {
        let manifest_path = if path.is_dir() {
            Some(path.join(MANIFEST_FILE))
        } else if path.file_name().is_some_and(|n| n == MANIFEST_FILE) {
            Some(path.clone())
        } else {
            None
        };
        let Some(manifest_path) = manifest_path else {
            let text = read(path)?;
            let dir = path.parent().unwrap_or(Path::new("."));
            let bases: Vec<&Path> = std::iter::once(dir).chain(dir.parent()).collect();
            inputs.add_case(path.display().to_string(), &text, &bases);
            continue;
        };
        let text = read(&manifest_path)?;
        let manifest = match parse_manifest(&text) {
            Ok(m) => m,
            Err(e) => {
                inputs.manifest_errors.push((manifest_path.display().to_string(), e));
                continue;
            }
        };
        for node in manifest.taxonomy {
            if !inputs.taxonomy.contains(&node) {
                inputs.taxonomy.push(node);
            }
        }
        let dir = manifest_path.parent().unwrap_or(Path::new("."));
        for rel in manifest.cases {
            let text = read(&dir.join(&rel))?;
            inputs.add_case(rel, &text, &[dir]);
        }
    }
    Ok(inputs)
}

fn case_errors(e: &CaseError) -> Vec<Value> {
    match e {
        CaseError::Schema { path, message } => vec![json!({"rule": "schema", "path": path, "message": message})],
        CaseError::Value(violations) => violations.iter().map(|v| json!(v)).collect(),
    }
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

fn ingest(ctx: &Ctx, paths: &[PathBuf], install: bool, o: &mut Output) -> u8 {
    let inputs = match load_inputs(paths) {
        Ok(i) => i,
        Err((path, e)) => {
            o.error(format_args!("cannot read {}: {e}", path.display()));
            return EXIT_IO;
        }
    };

    for missing in &inputs.missing_images {
        let _ = writeln!(o.err, "warning: image {missing} not found; exports will list it as missing");
    }
    let mut valid = Vec::new();
    let mut failed = !inputs.manifest_errors.is_empty();
    for (source, e) in &inputs.manifest_errors {
        o.emit(json!({"source": source, "status": "invalid", "errors": [{"rule": "manifest", "message": e.to_string()}]}), || {
            format!("invalid {source}\n  [manifest] {e}")
        });
    }
    for (source, result) in inputs.cases {
        match result {
            Ok(case) => {
                o.emit(json!({"source": source, "case": case.id, "status": "ok"}), || format!("ok      {}", case.id));
                valid.push(case);
            }
            Err(e) => {
                failed = true;
                let errors = case_errors(&e);
                o.emit(json!({"source": source, "status": "invalid", "errors": errors}), || {
                    let mut s = format!("invalid {source}");
                    for v in &errors {
                        s.push_str(&format!("\n  [{}] {}: {}", v["rule"].as_str().unwrap_or(""), v["path"].as_str().unwrap_or(""), v["message"].as_str().unwrap_or("")));
                    }
                    s
                });
            }
        }
    }
    if failed {
        return EXIT_FAILURE;
    }

    let count = valid.len();
    if !install {
        let mut taxonomy = inputs.taxonomy;
        if let Ok(existing) = Corpus::load(&ctx.root().corpus_dir) {
            for node in existing.taxonomy() {
                if !taxonomy.iter().any(|n| n.id == node.id) {
                    taxonomy.push(node.clone());
                }
            }
        }
        return match Corpus::new(taxonomy, valid) {
            Ok(_) => {
                o.emit(json!({"validated": count}), || format!("{} valid", plural(count, "case")));
                EXIT_OK
            }
            Err(e) => {
                o.emit(json!({"status": "invalid", "error": e.to_string()}), || format!("invalid corpus: {e}"));
                EXIT_FAILURE
            }
        };
    }

    let Some(store) = ctx.open(o) else { return EXIT_IO };
    match store.ingest(inputs.taxonomy, valid, inputs.images) {
        Ok(summary) => {
            o.emit(
                json!({"ingested": count, "added": summary.added, "replaced": summary.replaced, "unchanged": summary.unchanged}),
                || format!("{} ingested", plural(count, "case")),
            );
            EXIT_OK
        }
        Err(e) => {
            o.emit(json!({"status": "invalid", "code": e.code(), "error": e.to_string()}), || format!("rejected: {e}"));
            exit_for(&e)
        }
    }
}

fn classify(ctx: &Ctx, ids: &[String], o: &mut Output) -> u8 {
    let mut cases = Vec::new();
    let needs_store = ids.is_empty() || ids.iter().any(|a| !Path::new(a).is_file());
    let corpus = if needs_store {
        let Some(store) = ctx.open(o) else { return EXIT_IO };
        Some(store.corpus())
    } else {
        None
    };
    if ids.is_empty() {
        cases.extend(corpus.iter().flat_map(|c| c.cases().cloned()));
    }
    for arg in ids {
        if Path::new(arg).is_file() {
            let text = match read(Path::new(arg)) {
                Ok(t) => t,
                Err((p, e)) => {
                    o.error(format_args!("cannot read {}: {e}", p.display()));
                    return EXIT_IO;
                }
            };
            match parse_case(&text) {
                Ok(c) => cases.push(c),
                Err(e) => {
                    o.error(format_args!("{arg}: {e}"));
                    return EXIT_FAILURE;
                }
            }
        } else if let Some(c) = corpus.as_ref().and_then(|c| c.case(arg)) {
            cases.push(c.clone());
        } else {
            o.error(format_args!("case `{arg}` not found"));
            return EXIT_FAILURE;
        }
    }

    if !o.json {
        let _ = writeln!(o.out, "{:<24} {:<10} {:<10} {:<10} aggregate", "case", "incidence", "chain", "relevance");
    }
    for case in &cases {
        match profile_case(case) {
            Ok(p) => o.emit(json!({"case": case.id, "difficulty": p}), || {
                format!(
                    "{:<24} {:<10} {:<10} {:<10} {}",
                    case.id,
                    format!("{:?}", p.incidence),
                    format!("{:?}", p.chain),
                    format!("{:?}", p.relevance),
                    p.aggregate
                )
            }),
            Err(e) => {
                o.error(format_args!("{}: {e}", case.id));
                return EXIT_FAILURE;
            }
        }
    }
    EXIT_OK
}

fn search(ctx: &Ctx, query: &str, path: Option<&str>, o: &mut Output) -> u8 {
    let Some(store) = ctx.open(o) else { return EXIT_IO };
    let filter: Option<Vec<String>> =
        path.map(|p| p.split('/').filter(|s| !s.is_empty()).map(str::to_owned).collect());
    for hit in store.corpus().search_cases(query, filter.as_deref()) {
        o.emit(json!(hit), || {
            format!("{:<24} {:>2}  {}", hit.case.id, hit.matched_keywords, hit.case.description)
        });
    }
    EXIT_OK
}

fn simulate(ctx: &Ctx, path: &Path, out: Option<PathBuf>, o: &mut Output) -> u8 {
    let text = match read(path) {
        Ok(t) => t,
        Err((p, e)) => {
            o.error(format_args!("cannot read {}: {e}", p.display()));
            return EXIT_IO;
        }
    };
    let script = match parse_script(&text) {
        Ok(s) => s,
        Err(e) => {
            o.error(format_args!("{}: {e}", path.display()));
            return EXIT_IO;
        }
    };
    let Some(store) = ctx.open(o) else { return EXIT_IO };

    let (session_id, code) = match run_script(&store, &script) {
        Ok(report) => {
            for step in &report.steps {
                o.emit(json!(step), || match &step.error {
                    Some(code) => format!("seq {:<3} {:<18} rejected as expected ({code})", step.seq, step.op),
                    None => format!("seq {:<3} {:<18} ok", step.seq, step.op),
                });
            }
            (report.session.id.clone(), EXIT_OK)
        }
        Err(RunError::Setup(e)) => {
            o.error(format_args!("cannot start a session for case `{}`: {e}", script.case_id));
            return exit_for(&e).max(EXIT_IO);
        }
        Err(e) => {
            if o.json {
                o.emit(json!({"status": "failed", "error": e.to_string()}), String::new);
            }
            let _ = writeln!(o.err, "FAILED {e}");
            (e.session_id().unwrap_or_default().to_owned(), EXIT_FAILURE)
        }
    };

    let bytes = match store.export(&session_id) {
        Ok(b) => b,
        Err(e) => {
            o.error(format_args!("export failed: {e}"));
            return exit_for(&e);
        }
    };
    let out = out.unwrap_or_else(|| ctx.store.join("exports").join(format!("{session_id}.tar.gz")));
    if let Err(e) = write_file(&out, &bytes) {
        o.error(format_args!("cannot write {}: {e}", out.display()));
        return EXIT_IO;
    }
    let step = store.session(&session_id).map(|s| s.step).ok();
    o.emit(
        json!({"session": session_id, "step": step, "bundle": out.display().to_string(), "sha256": sha256_hex(&bytes), "passed": code == EXIT_OK}),
        || format!("session {session_id} at {}; bundle {}", step.map_or("?".into(), |s| format!("{s:?}")), out.display()),
    );
    code
}

fn score(ctx: &Ctx, report_id: &str, paths: &[PathBuf], o: &mut Output) -> u8 {
    let mut sheets: Vec<RaterSheet> = Vec::with_capacity(paths.len());
    for path in paths {
        let text = match read(path) {
            Ok(t) => t,
            Err((p, e)) => {
                o.error(format_args!("cannot read {}: {e}", p.display()));
                return EXIT_IO;
            }
        };
        match parse_rater_sheet(&text) {
            Ok(s) => sheets.push(s),
            Err(e) => {
                o.error(format_args!("{}: {e}", path.display()));
                return EXIT_FAILURE;
            }
        }
    }

    let recorded = ctx.root().sessions_dir.join(report_id).is_dir();
    let aggregate = if recorded {
        let Some(store) = ctx.open(o) else { return EXIT_IO };
        for sheet in &sheets {
            if let Err(e) = store.commit(report_id, Action::SubmitScores(sheet.clone()), ACTOR) {
                o.error(format_args!("cannot record sheet of rater `{}`: {e}", sheet.rater_id));
                return exit_for(&e);
            }
        }
        let session = match store.session(report_id) {
            Ok(s) => s,
            Err(e) => {
                o.error(&e);
                return exit_for(&e);
            }
        };
        aggregate_scores(&session.rater_sheets)
    } else {
        let _ = writeln!(o.err, "note: report `{report_id}` is not in the store; scores are not recorded");
        aggregate_scores(&sheets)
    };
    match aggregate {
        Ok(a) => {
            print_aggregate(report_id, &a, o);
            EXIT_OK
        }
        Err(e) => {
            o.error(e);
            EXIT_FAILURE
        }
    }
}

fn print_aggregate(report_id: &str, a: &AggregateScore, o: &mut Output) {
    if !o.json {
        let _ = writeln!(o.out, "report {report_id}, {}", plural(a.raters, "rater"));
        let _ = writeln!(o.out, "{:<44} mean", "criterion");
    }
    for (id, mean) in &a.per_criterion {
        let criterion = clinreason_core::reporting::RUBRIC.iter().find(|c| u32::from(c.id) == *id);
        let title = criterion.map_or("", |c| c.title);
        o.emit(json!({"kind": "criterion", "id": id, "title": title, "mean": mean}), || {
            format!("{:<44} {mean}", format!("{id:>2} {title}"))
        });
    }
    if !o.json {
        let _ = writeln!(o.out, "{:<44} mean", "dimension");
    }
    for step in CrcStep::ALL {
        if let Some(mean) = a.per_dimension.get(&step) {
            o.emit(json!({"kind": "dimension", "dimension": step, "mean": mean}), || format!("{:<44} {mean}", step.title()));
        }
    }
    o.emit(json!({"kind": "overall", "raters": a.raters, "mean": a.overall}), || format!("{:<44} {}", "overall", a.overall));
}

fn export(ctx: &Ctx, session_id: &str, out: Option<PathBuf>, o: &mut Output) -> u8 {
    let Some(store) = ctx.open(o) else { return EXIT_IO };
    let bytes = match store.export(session_id) {
        Ok(b) => b,
        Err(e) => {
            o.error(&e);
            return exit_for(&e);
        }
    };
    let out = out.unwrap_or_else(|| PathBuf::from(format!("{session_id}.tar.gz")));
    if let Err(e) = write_file(&out, &bytes) {
        o.error(format_args!("cannot write {}: {e}", out.display()));
        return EXIT_IO;
    }
    o.emit(json!({"session": session_id, "bundle": out.display().to_string(), "sha256": sha256_hex(&bytes)}), || {
        format!("wrote {}", out.display())
    });
    EXIT_OK
}

fn serve(ctx: &Ctx, listen: Option<String>, o: &mut Output) -> u8 {
    let mut config = ServiceConfig::from_env();
    config.store_root = ctx.store.clone();
    if let Some(addr) = listen {
        config.listen_addr = addr;
    }
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(r) => r,
        Err(e) => {
            o.error(e);
            return EXIT_IO;
        }
    };
    match runtime.block_on(clinreason_service::serve(config, ctx.clock.clone())) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            o.error(e);
            EXIT_IO
        }
    }
}
