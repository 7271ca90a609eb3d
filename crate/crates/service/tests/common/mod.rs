#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clinreason_core::inquiry::ModelAdapter;
use clinreason_core::FixedStepClock;
use clinreason_service::{Store, StoreRoot};

pub fn fixture_corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus")
}

pub fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// A temp store root whose corpus is a copy of the fixtures.
pub fn fixture_root() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture_corpus(), &dir.path().join("corpus"));
    dir
}

pub fn open(root: &Path, seed: i64) -> Store {
    Store::open(StoreRoot::at(root), Arc::new(FixedStepClock::seeded(seed)), ModelAdapter::disabled()).unwrap()
}
