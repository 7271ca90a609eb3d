use serde::Serialize;

use crate::case::{CaseRecord, LabValue, NormalRange, PacketBody, Polarity};

/// Fixed guideline text for the question-answering assistant.
pub const QA_GUIDELINES: &str = r#"You are a medical assistant. Based on the following patient case data, respond to the user's symptom inquiries by adhering to the following guidelines:

1. Single Symptom Evaluation:
    - If the patient's case data includes the mentioned symptom, respond with "Yes" and provide relevant details (e.g., severity, duration, related measurements).
    - If the symptom is not present in the case data, respond with "Irrelevant".

2. Multiple Symptoms Evaluation:
    - If the user mentions multiple symptoms, evaluate each symptom individually.
    - Present the results in a clear, organized list format. For example:
        Symptom 1: Yes
        Relevant Data: [Details]

        Symptom 2: Irrelevant

        Symptom 3: Yes
        Relevant Data: [Details]

3. Response Format:
    - Ensure responses are clear, concise, and professionally formatted.
    - Use bullet points or numbered lists for multiple symptoms to enhance readability.

4. Language and Tone:
    - Maintain a professional and objective tone.
    - Avoid subjective judgments or ambiguous language.

5. Error Handling:
    - If the user's input is unclear or does not specify a symptom, respond with a clarifying question. For example: "Could you please specify the symptom you are inquiring about?"

Example Scenario:

- User Input: "Does the patient have a fever and headache?"

- Possible Response:
    Fever: Yes
    Relevant Data: Temperature is 38.5°C, duration of 3 days.

    Headache: Irrelevant

Ensure that all responses strictly follow the above guidelines to maintain consistency and reliability.
"#;

pub const CASE_DATA_HEADER: &str = "Patient case data:\n";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RenderedPrompt {
    pub text: String,
}

#[derive(Serialize)]
struct CaseData<'a> {
    findings: Vec<FindingData<'a>>,
    packets: Vec<PacketData<'a>>,
}

#[derive(Serialize)]
struct FindingData<'a> {
    term: &'a str,
    synonyms: &'a [String],
    status: &'static str,
    details: &'a str,
}

#[derive(Serialize)]
struct PacketData<'a> {
    title: &'a str,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<&'a str>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    results: Vec<String>,
}

/// Guideline text followed by a canonical JSON rendering of the record's
/// findings and evidence packets (in reveal order).
pub fn render_case_prompt(record: &CaseRecord) -> RenderedPrompt {
    let findings = record
        .findings
        .iter()
        .map(|f| FindingData {
            term: &f.term,
            synonyms: &f.synonyms,
            status: match f.polarity {
                Polarity::Present => "present",
                Polarity::Denied => "denied",
            },
            details: &f.details,
        })
        .collect();
    let packets = record
        .packets_in_reveal_order()
        .into_iter()
        .map(|p| match &p.body {
            PacketBody::ExamText { text } => {
                PacketData { title: &p.title, kind: "physical examination", text: Some(text), results: vec![] }
            }
            PacketBody::ImagingStudy { report, .. } => {
                PacketData { title: &p.title, kind: "imaging", text: Some(report), results: vec![] }
            }
            PacketBody::LabPanel { labs } => PacketData {
                title: &p.title,
                kind: "laboratory",
                text: None,
                results: labs
                    .iter()
                    .map(|l| {
                        let value = match &l.value {
                            LabValue::Numeric(v) => format!("{v} {}", l.unit),
                            LabValue::Categorical(s) => s.clone(),
                        };
                        let range = match &l.normal_range {
                            NormalRange::Interval { lo, hi } => format!("{lo}-{hi} {}", l.unit),
                            NormalRange::Expected(e) => e.clone(),
                        };
                        format!("{}: {} (normal range: {})", l.item, value.trim_end(), range.trim_end())
                    })
                    .collect(),
            },
        })
        .collect();

    let data = serde_json::to_string_pretty(&CaseData { findings, packets }).expect("case data serializes");
    let mut text = String::with_capacity(QA_GUIDELINES.len() + CASE_DATA_HEADER.len() + data.len() + 2);
    text.push_str(QA_GUIDELINES);
    text.push('\n');
    text.push_str(CASE_DATA_HEADER);
    text.push_str(&data);
    text.push('\n');
    RenderedPrompt { text }
}
