use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::{CaseRecord, LabValue, NormalRange, PacketBody, Polarity};
use crate::text::normalize;

/// One broken invariant: the rule that failed and the field it applies to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: &'static str,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, rule: &'static str, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { rule, path: path.into(), message: message.into() });
    }
}

/// Checks every record-level invariant. Taxonomy resolution is checked by
/// [`super::Corpus`], since it needs the manifest.
pub fn validate_case(record: &CaseRecord) -> ValidationReport {
    let mut report = ValidationReport::default();

    if record.id.trim().is_empty() {
        report.push("case.id-empty", "id", "case id is empty");
    } else if !super::is_safe_id(&record.id) {
        report.push("case.id-charset", "id", "case id may only use ASCII letters, digits, '-', '_' and '.'");
    }
    if record.taxonomy_path.is_empty() {
        report.push("case.taxonomy-path-empty", "taxonomy_path", "taxonomy path is empty");
    }

    let rate = record.difficulty.incidence_per_100k;
    if !(rate.is_finite() && rate > 0.0) {
        report.push(
            "difficulty.incidence-nonpositive",
            "difficulty.incidence_per_100k",
            format!("incidence rate must be a positive number, got {rate}"),
        );
    }
    if record.difficulty.chain_length < 1 {
        report.push("difficulty.chain-zero", "difficulty.chain_length", "chain length must be at least 1");
    }

    check_findings(record, &mut report);
    check_packets(record, &mut report);
    report
}

fn check_findings(record: &CaseRecord, report: &mut ValidationReport) {
    let narrative = normalize(&record.initial_narrative);
    let mut seen_terms = HashSet::new();

    for (i, finding) in record.findings.iter().enumerate() {
        let path = format!("findings[{i}]");
        let canonical = finding.canonical();
        if canonical.is_empty() {
            report.push("finding.term-empty", format!("{path}.term"), "finding term is empty");
            continue;
        }
        if !seen_terms.insert(canonical.clone()) {
            report.push(
                "finding.duplicate-term",
                format!("{path}.term"),
                format!("term `{canonical}` is defined by more than one finding"),
            );
        }

        let mut forms = HashSet::from([canonical.clone()]);
        for (j, syn) in finding.synonyms.iter().enumerate() {
            let s = normalize(syn);
            if s.is_empty() {
                report.push("finding.synonym-empty", format!("{path}.synonyms[{j}]"), "synonym is empty");
            } else if !forms.insert(s.clone()) {
                report.push(
                    "finding.synonym-duplicate",
                    format!("{path}.synonyms[{j}]"),
                    format!("synonym `{s}` duplicates an earlier form"),
                );
            }
        }

        match finding.polarity {
            Polarity::Present => {
                if finding.details.trim().is_empty() {
                    report.push(
                        "finding.present-details-empty",
                        format!("{path}.details"),
                        "present findings must describe the finding",
                    );
                }
            }
            Polarity::Denied => {
                if finding.details.chars().any(|c| c.is_ascii_digit()) {
                    report.push(
                        "finding.denied-details",
                        format!("{path}.details"),
                        "denied findings carry no measurements",
                    );
                }
                for form in &forms {
                    if narrative.contains(form.as_str()) {
                        report.push(
                            "case.narrative-mentions-denied",
                            "initial_narrative",
                            format!("narrative mentions denied finding `{form}`"),
                        );
                    }
                }
            }
        }
    }
}

fn check_packets(record: &CaseRecord, report: &mut ValidationReport) {
    let mut orders = HashSet::new();
    let mut ids = HashSet::new();

    for (i, packet) in record.packets.iter().enumerate() {
        let path = format!("packets[{i}]");
        if packet.id.trim().is_empty() {
            report.push("packet.id-empty", format!("{path}.id"), "packet id is empty");
        } else if !ids.insert(packet.id.as_str()) {
            report.push("packet.id-duplicate", format!("{path}.id"), format!("packet id `{}` repeats", packet.id));
        }
        if !orders.insert(packet.reveal_order) {
            report.push(
                "packet.reveal-order-duplicate",
                format!("{path}.reveal_order"),
                format!("reveal order {} is used by another packet", packet.reveal_order),
            );
        }

        match &packet.body {
            PacketBody::ExamText { .. } => {}
            PacketBody::ImagingStudy { image, .. } => {
                let p = &image.path;
                if p.is_empty() || p.starts_with('/') || p.contains('\\') || p.split('/').any(|s| s == "..") {
                    report.push(
                        "packet.image-path",
                        format!("{path}.body.image"),
                        "image reference must be a relative path inside the corpus",
                    );
                }
                if image.sha256.len() != 64 || !image.sha256.chars().all(|c| c.is_ascii_hexdigit()) {
                    report.push(
                        "packet.image-hash",
                        format!("{path}.body.sha256"),
                        "image hash must be 64 hex digits",
                    );
                }
            }
            PacketBody::LabPanel { labs } => {
                if labs.is_empty() {
                    report.push("packet.lab-panel-empty", format!("{path}.body.labs"), "lab panel has no results");
                }
                for (j, lab) in labs.iter().enumerate() {
                    let lab_path = format!("{path}.body.labs[{j}]");
                    match (&lab.value, &lab.normal_range) {
                        (LabValue::Numeric(v), NormalRange::Interval { lo, hi }) => {
                            if !(v.is_finite() && lo.is_finite() && hi.is_finite()) {
                                report.push("lab.value-not-finite", lab_path.clone(), "lab numbers must be finite");
                            }
                            if lo > hi {
                                report.push(
                                    "lab.range-inverted",
                                    format!("{lab_path}.normal_range"),
                                    format!("normal range lower bound {lo} exceeds upper bound {hi}"),
                                );
                            }
                            if lab.unit.trim().is_empty() {
                                report.push("lab.unit-missing", format!("{lab_path}.unit"), "numeric result needs a unit");
                            }
                        }
                        (LabValue::Categorical(_), NormalRange::Expected(_)) => {}
                        _ => report.push(
                            "lab.kind-mismatch",
                            format!("{lab_path}.normal_range"),
                            "numeric results need an interval, categorical results an expected value",
                        ),
                    }
                }
            }
        }
    }
}
