//! The case document format: a single self-contained JSON file per case.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    validate_case, CaseError, CaseRecord, ClassicRelevance, DifficultyAttributes, EvidencePacket,
    Finding, GroundTruth, ImageRef, LabResult, LabValue, NormalRange, PacketBody, PacketKind,
    Polarity, StepVisibility,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseDocument {
    pub id: String,
    pub taxonomy_path: Vec<String>,
    pub description: String,
    pub initial_narrative: String,
    pub findings: Vec<FindingDoc>,
    pub packets: Vec<PacketDoc>,
    pub prognosis: String,
    pub ground_truth: GroundTruthDoc,
    pub difficulty: DifficultyDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FindingDoc {
    pub term: String,
    pub synonyms: Vec<String>,
    pub polarity: Polarity,
    pub details: String,
    pub step_visibility: StepVisibility,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketDoc {
    pub id: String,
    pub kind: PacketKind,
    pub title: String,
    pub reveal_order: u32,
    pub body: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExamTextBody {
    text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImagingBody {
    image: String,
    sha256: String,
    report: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabPanelBody {
    labs: Vec<LabDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum LabValueDoc {
    Numeric(f64),
    Categorical(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabDoc {
    item: String,
    value: LabValueDoc,
    #[serde(default)]
    unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    range_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    range_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expected: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthDoc {
    pub diagnosis: String,
    pub treatment: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DifficultyDoc {
    pub incidence_per_100k: f64,
    pub chain_length: u32,
    pub classic_relevance: ClassicRelevance,
}

/// Decodes and validates a case document.
pub fn parse_case(document: &str) -> Result<CaseRecord, CaseError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let doc: CaseDocument = serde_path_to_error::deserialize(de).map_err(|e| CaseError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let record = CaseRecord::try_from(doc)?;
    let report = validate_case(&record);
    if report.is_valid() {
        Ok(record)
    } else {
        Err(CaseError::Value(report.violations))
    }
}

/// Canonical pretty-printed document for a record.
pub fn serialize_case(record: &CaseRecord) -> String {
    serde_json::to_string_pretty(&CaseDocument::from(record.clone()))
        .expect("case documents always serialize")
}

fn body_field<T: serde::de::DeserializeOwned>(index: usize, body: Value) -> Result<T, CaseError> {
    serde_path_to_error::deserialize(body).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." {
            format!("packets[{index}].body")
        } else {
            format!("packets[{index}].body.{inner}")
        };
        CaseError::Schema { path, message: e.inner().to_string() }
    })
}

fn decode_lab(packet: usize, index: usize, lab: LabDoc) -> Result<LabResult, CaseError> {
    let path = |field: &str| format!("packets[{packet}].body.labs[{index}].{field}");
    let (value, normal_range) = match lab.value {
        LabValueDoc::Numeric(v) => {
            let (Some(lo), Some(hi)) = (lab.range_lo, lab.range_hi) else {
                return Err(CaseError::Schema {
                    path: path("range_lo"),
                    message: "numeric result requires range_lo and range_hi".into(),
                });
            };
            if lab.expected.is_some() {
                return Err(CaseError::Schema {
                    path: path("expected"),
                    message: "numeric result cannot carry a categorical expected value".into(),
                });
            }
            (LabValue::Numeric(v), NormalRange::Interval { lo, hi })
        }
        LabValueDoc::Categorical(s) => {
            let Some(expected) = lab.expected else {
                return Err(CaseError::Schema {
                    path: path("expected"),
                    message: "categorical result requires an expected value".into(),
                });
            };
            if lab.range_lo.is_some() || lab.range_hi.is_some() {
                return Err(CaseError::Schema {
                    path: path("range_lo"),
                    message: "categorical result cannot carry a numeric range".into(),
                });
            }
            (LabValue::Categorical(s), NormalRange::Expected(expected))
        }
    };
    Ok(LabResult { item: lab.item, value, unit: lab.unit, normal_range })
}

impl TryFrom<CaseDocument> for CaseRecord {
    type Error = CaseError;

    fn try_from(doc: CaseDocument) -> Result<Self, Self::Error> {
        let findings = doc
            .findings
            .into_iter()
            .map(|f| Finding {
                term: f.term,
                synonyms: f.synonyms,
                polarity: f.polarity,
                details: f.details,
                step_visibility: f.step_visibility,
            })
            .collect();

        let mut packets = Vec::with_capacity(doc.packets.len());
        for (i, p) in doc.packets.into_iter().enumerate() {
            let body = match p.kind {
                PacketKind::ExamText => {
                    let b: ExamTextBody = body_field(i, p.body)?;
                    PacketBody::ExamText { text: b.text }
                }
                PacketKind::ImagingStudy => {
                    let b: ImagingBody = body_field(i, p.body)?;
                    PacketBody::ImagingStudy {
                        image: ImageRef { path: b.image, sha256: b.sha256 },
                        report: b.report,
                    }
                }
                PacketKind::LabPanel => {
                    let b: LabPanelBody = body_field(i, p.body)?;
                    let labs = b
                        .labs
                        .into_iter()
                        .enumerate()
                        .map(|(j, lab)| decode_lab(i, j, lab))
                        .collect::<Result<Vec<_>, _>>()?;
                    PacketBody::LabPanel { labs }
                }
            };
            packets.push(EvidencePacket { id: p.id, title: p.title, reveal_order: p.reveal_order, body });
        }

        Ok(CaseRecord {
            id: doc.id,
            taxonomy_path: doc.taxonomy_path,
            description: doc.description,
            initial_narrative: doc.initial_narrative,
            findings,
            packets,
            prognosis: doc.prognosis,
            ground_truth: GroundTruth {
                diagnosis: doc.ground_truth.diagnosis,
                treatment: doc.ground_truth.treatment,
            },
            difficulty: DifficultyAttributes {
                incidence_per_100k: doc.difficulty.incidence_per_100k,
                chain_length: doc.difficulty.chain_length,
                classic_relevance: doc.difficulty.classic_relevance,
            },
        })
    }
}

impl From<EvidencePacket> for PacketDoc {
    fn from(p: EvidencePacket) -> Self {
        let kind = p.kind();
        let body = match p.body {
            PacketBody::ExamText { text } => serde_json::to_value(ExamTextBody { text }),
            PacketBody::ImagingStudy { image, report } => {
                serde_json::to_value(ImagingBody { image: image.path, sha256: image.sha256, report })
            }
            PacketBody::LabPanel { labs } => {
                serde_json::to_value(LabPanelBody { labs: labs.into_iter().map(encode_lab).collect() })
            }
        }
        .expect("packet bodies serialize");
        PacketDoc { id: p.id, kind, title: p.title, reveal_order: p.reveal_order, body }
    }
}

impl From<CaseRecord> for CaseDocument {
    fn from(r: CaseRecord) -> Self {
        CaseDocument {
            id: r.id,
            taxonomy_path: r.taxonomy_path,
            description: r.description,
            initial_narrative: r.initial_narrative,
            findings: r
                .findings
                .into_iter()
                .map(|f| FindingDoc {
                    term: f.term,
                    synonyms: f.synonyms,
                    polarity: f.polarity,
                    details: f.details,
                    step_visibility: f.step_visibility,
                })
                .collect(),
            packets: r.packets.into_iter().map(PacketDoc::from).collect(),
            prognosis: r.prognosis,
            ground_truth: GroundTruthDoc { diagnosis: r.ground_truth.diagnosis, treatment: r.ground_truth.treatment },
            difficulty: DifficultyDoc {
                incidence_per_100k: r.difficulty.incidence_per_100k,
                chain_length: r.difficulty.chain_length,
                classic_relevance: r.difficulty.classic_relevance,
            },
        }
    }
}

fn encode_lab(lab: LabResult) -> LabDoc {
    let value = match lab.value {
        LabValue::Numeric(v) => LabValueDoc::Numeric(v),
        LabValue::Categorical(s) => LabValueDoc::Categorical(s),
    };
    let (range_lo, range_hi, expected) = match lab.normal_range {
        NormalRange::Interval { lo, hi } => (Some(lo), Some(hi), None),
        NormalRange::Expected(e) => (None, None, Some(e)),
    };
    LabDoc { item: lab.item, value, unit: lab.unit, range_lo, range_hi, expected }
}
