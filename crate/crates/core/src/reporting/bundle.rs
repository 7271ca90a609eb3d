//! Session export: a gzip-compressed tar of structured-text files with a
//! hash manifest. Output is a pure function of the session log and case.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use flate2::{read::GzDecoder, write::GzEncoder, Compression};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::render_report_text;
use crate::case::{CaseRecord, PacketBody};
use crate::clock::Timestamp;
use crate::session::{encode_log, ActionRecord, Session};

pub const BUNDLE_FILES: [&str; 9] = [
    "manifest",
    "actions.log",
    "session.snapshot",
    "report.struct",
    "report.txt",
    "mindmap.struct",
    "diagnosis_history.struct",
    "annotations.struct",
    "images/",
];

const MAX_BUNDLE_BYTES: u64 = 64 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleManifest {
    pub session_id: String,
    pub case_id: String,
    /// False until the session reached the final step and has a report.
    pub complete: bool,
    pub exported_at: Timestamp,
    pub post_reveal_edits: usize,
    #[serde(default)]
    pub missing_images: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("archive error: {0}")]
    Archive(String),
    #[error("bundle has no manifest")]
    NoManifest,
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("entry `{0}` is not allowed in a bundle")]
    UnexpectedEntry(String),
    #[error("entry `{0}` listed in the manifest is missing")]
    MissingEntry(String),
    #[error("hash mismatch for `{0}`")]
    HashMismatch(String),
    #[error("bundle exceeds {MAX_BUNDLE_BYTES} bytes")]
    TooLarge,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportedBundle {
    pub manifest: BundleManifest,
    /// Every entry except the manifest, by name.
    pub files: BTreeMap<String, Vec<u8>>,
}

impl ImportedBundle {
    pub fn text(&self, name: &str) -> Option<&str> {
        self.files.get(name).and_then(|b| std::str::from_utf8(b).ok())
    }
}

/// Lowercase hex SHA-256 digest.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("bundle entries serialize");
    s.push(b'\n');
    s
}

/// Builds the export archive. `images` resolves a case-relative image path
/// to its bytes; unresolvable images are listed in the manifest.
pub fn export_bundle(
    session: &Session,
    log: &[ActionRecord],
    case: &CaseRecord,
    images: &dyn Fn(&str) -> Option<Vec<u8>>,
) -> Vec<u8> {
    let mut files: Vec<(String, Vec<u8>)> = vec![
        ("actions.log".into(), encode_log(log).into_bytes()),
        ("session.snapshot".into(), session.snapshot_json().into_bytes()),
    ];
    if let Some(report) = &session.report {
        files.push(("report.struct".into(), pretty(report)));
        files.push(("report.txt".into(), render_report_text(report).into_bytes()));
    }
    files.push(("mindmap.struct".into(), pretty(&session.mind_map)));
    files.push(("diagnosis_history.struct".into(), pretty(&session.diagnosis_list)));
    files.push(("annotations.struct".into(), pretty(&session.annotations)));

    let mut missing_images = Vec::new();
    for id in &session.revealed_packet_ids {
        if let Some(PacketBody::ImagingStudy { image, .. }) = case.packet(id).map(|p| &p.body) {
            match images(&image.path) {
                Some(bytes) => {
                    let name = image.path.strip_prefix("images/").unwrap_or(&image.path);
                    files.push((format!("images/{name}"), bytes));
                }
                None => missing_images.push(image.path.clone()),
            }
        }
    }

    let manifest = BundleManifest {
        session_id: session.id.clone(),
        case_id: session.case_id.clone(),
        complete: session.step == crate::session::Step::PrognosisReflection && session.report.is_some(),
        exported_at: session.updated_at,
        post_reveal_edits: session.diagnosis_list.iter().flat_map(|e| &e.history).filter(|h| h.post_reveal).count(),
        missing_images,
        entries: files
            .iter()
            .map(|(name, bytes)| ManifestEntry { name: name.clone(), sha256: sha256_hex(bytes), size: bytes.len() as u64 })
            .collect(),
    };

    let encoder = GzEncoder::new(Vec::new(), Compression::default());
    let mut tar = tar::Builder::new(encoder);
    let mut append = |name: &str, bytes: &[u8]| {
        let mut header = tar::Header::new_gnu();
        header.set_size(bytes.len() as u64);
        header.set_mode(0o644);
        header.set_mtime(0);
        header.set_uid(0);
        header.set_gid(0);
        header.set_entry_type(tar::EntryType::Regular);
        tar.append_data(&mut header, name, bytes).expect("in-memory tar write");
    };
    append("manifest", &pretty(&manifest));
    for (name, bytes) in &files {
        append(name, bytes);
    }
    let mut encoder = tar.into_inner().expect("in-memory tar finish");
    encoder.flush().expect("in-memory gzip flush");
    encoder.finish().expect("in-memory gzip finish")
}

fn allowed(name: &str) -> bool {
    if let Some(rest) = name.strip_prefix("images/") {
        return !rest.is_empty() && !rest.starts_with('/') && rest.split('/').all(|s| !s.is_empty() && s != "..");
    }
    BUNDLE_FILES.contains(&name)
}

/// Reads an archive and verifies every manifest hash.
pub fn import_bundle(bytes: &[u8]) -> Result<ImportedBundle, BundleError> {
    let arch = |e: std::io::Error| BundleError::Archive(e.to_string());
    let mut archive = tar::Archive::new(GzDecoder::new(bytes).take(MAX_BUNDLE_BYTES + 1));
    let mut manifest = None;
    let mut files = BTreeMap::new();
    let mut total = 0u64;
    for entry in archive.entries().map_err(arch)? {
        let mut entry = entry.map_err(arch)?;
        if !matches!(entry.header().entry_type(), tar::EntryType::Regular) {
            return Err(BundleError::Archive("only regular files are allowed".into()));
        }
        let name = String::from_utf8_lossy(&entry.path_bytes()).into_owned();
        if !allowed(&name) || name == "images/" {
            return Err(BundleError::UnexpectedEntry(name));
        }
        total = total.saturating_add(entry.size());
        if total > MAX_BUNDLE_BYTES {
            return Err(BundleError::TooLarge);
        }
        let mut data = Vec::new();
        entry.read_to_end(&mut data).map_err(arch)?;
        if name == "manifest" {
            let m: BundleManifest = serde_json::from_slice(&data).map_err(|e| BundleError::Manifest(e.to_string()))?;
            manifest = Some(m);
        } else if files.insert(name.clone(), data).is_some() {
            return Err(BundleError::UnexpectedEntry(name));
        }
    }
    let manifest = manifest.ok_or(BundleError::NoManifest)?;
    for e in &manifest.entries {
        let data = files.get(&e.name).ok_or_else(|| BundleError::MissingEntry(e.name.clone()))?;
        if sha256_hex(data) != e.sha256 || data.len() as u64 != e.size {
            return Err(BundleError::HashMismatch(e.name.clone()));
        }
    }
    if let Some(extra) = files.keys().find(|k| !manifest.entries.iter().any(|e| &e.name == *k)) {
        return Err(BundleError::UnexpectedEntry(extra.clone()));
    }
    Ok(ImportedBundle { manifest, files })
}
