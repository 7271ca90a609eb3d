#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn walkthrough() -> PathBuf {
    fixtures().join("scripts/cervical_walkthrough.json")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn clinreason(store: &Path, args: &[&str]) -> Run {
    let Output { status, stdout, stderr } = Command::new(env!("CARGO_BIN_EXE_clinreason"))
        .arg("--store")
        .arg(store)
        .args(args)
        .env_remove("STORE_ROOT")
        .output()
        .expect("binary runs");
    Run {
        code: status.code().expect("exited normally"),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

/// A fresh store with the fixture corpus ingested through the CLI.
pub fn ingested_store() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let corpus = fixtures().join("corpus");
    let run = clinreason(dir.path(), &["ingest", corpus.to_str().unwrap()]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    dir
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

pub fn sheet(rater: &str, score: impl Fn(u32) -> i64) -> String {
    let scores: serde_json::Map<String, serde_json::Value> = (1..=16).map(|c| (c.to_string(), score(c).into())).collect();
    serde_json::json!({"rater_id": rater, "scores": scores}).to_string()
}
