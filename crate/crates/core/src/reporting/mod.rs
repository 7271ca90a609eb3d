//! Clinical-reasoning-cycle reports, rubric scoring and session export.

mod bundle;
mod report;
mod rubric;

pub use bundle::{export_bundle, import_bundle, sha256_hex, BundleError, BundleManifest, ImportedBundle, ManifestEntry, BUNDLE_FILES};
pub use report::{generate_report, render_report_text, CaseReport, CrcSection, CrcStep, ReportError};
pub use rubric::{
    aggregate_scores, parse_rater_sheet, validate_sheet, AggregateScore, Mean, RaterSheet, RubricCriterion, ScoreError,
    MAX_SCORE, RUBRIC,
};
