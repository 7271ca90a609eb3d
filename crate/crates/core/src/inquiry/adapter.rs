use std::time::Duration;

use serde_json::json;

use super::{denial_sentence, extract_terms, render_case_prompt, InquiryResponse, Lexicon, SymptomVerdict, Verdict};
use crate::case::CaseRecord;
use crate::text::normalize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("transport error: {0}")]
pub struct TransportError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unparseable model reply ({reason})")]
pub struct ParseError {
    pub reason: String,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AdapterError {
    #[error("model adapter is disabled (oracle-only mode)")]
    Disabled,
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// A chat-style completion endpoint: one system message, one user message.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, system: &str, user: &str) -> Result<String, TransportError>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdapterConfig {
    pub endpoint: Option<String>,
    pub credential: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub oracle_only: bool,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self { endpoint: None, credential: None, model: String::new(), timeout: Duration::from_secs(30), oracle_only: true }
    }
}

impl AdapterConfig {
    /// Reads `MODEL_ENDPOINT`, `MODEL_KEY`, `MODEL_NAME`,
    /// `MODEL_TIMEOUT_SECS` and `ORACLE_ONLY`. Without an endpoint the
    /// adapter stays in oracle-only mode.
    pub fn from_env() -> Self {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Self {
        let endpoint = get("MODEL_ENDPOINT").filter(|s| !s.trim().is_empty());
        let flag = get("ORACLE_ONLY").map(|v| matches!(v.trim().to_ascii_lowercase().as_str(), "1" | "true" | "yes"));
        Self {
            oracle_only: flag.unwrap_or(false) || endpoint.is_none(),
            endpoint,
            credential: get("MODEL_KEY").filter(|s| !s.is_empty()),
            model: get("MODEL_NAME").unwrap_or_default(),
            timeout: get("MODEL_TIMEOUT_SECS")
                .and_then(|s| s.trim().parse().ok())
                .map(Duration::from_secs)
                .unwrap_or(Duration::from_secs(30)),
        }
    }
}

/// OpenAI-compatible `chat/completions` client.
pub struct ChatCompletionsBackend {
    endpoint: String,
    credential: Option<String>,
    model: String,
    agent: ureq::Agent,
}

impl ChatCompletionsBackend {
    pub fn new(config: &AdapterConfig) -> Option<Self> {
        let endpoint = config.endpoint.clone()?;
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        Some(Self { endpoint, credential: config.credential.clone(), model: config.model.clone(), agent })
    }
}

impl CompletionBackend for ChatCompletionsBackend {
    fn complete(&self, system: &str, user: &str) -> Result<String, TransportError> {
        let body = json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.credential {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let resp: serde_json::Value = req
            .send_json(body)
            .map_err(|e| TransportError(e.to_string()))?
            .into_json()
            .map_err(|e| TransportError(e.to_string()))?;
        resp.pointer("/choices/0/message/content")
            .and_then(|v| v.as_str())
            .map(str::to_owned)
            .ok_or_else(|| TransportError("response has no choices[0].message.content".into()))
    }
}

/// Holds an optional backend; `None` means oracle-only.
#[derive(Default)]
pub struct ModelAdapter {
    backend: Option<Box<dyn CompletionBackend>>,
}

impl ModelAdapter {
    pub fn disabled() -> Self {
        Self { backend: None }
    }

    pub fn with_backend(backend: impl CompletionBackend + 'static) -> Self {
        Self { backend: Some(Box::new(backend)) }
    }

    pub fn from_config(config: &AdapterConfig) -> Self {
        if config.oracle_only {
            return Self::disabled();
        }
        match ChatCompletionsBackend::new(config) {
            Some(b) => Self::with_backend(b),
            None => Self::disabled(),
        }
    }

    pub fn is_enabled(&self) -> bool {
        self.backend.is_some()
    }
}

/// Sends the rendered case prompt and the learner question to the model and
/// parses its reply.
pub fn model_answer(
    adapter: &ModelAdapter,
    record: &CaseRecord,
    lexicon: &Lexicon,
    raw_text: &str,
) -> Result<InquiryResponse, AdapterError> {
    let backend = adapter.backend.as_deref().ok_or(AdapterError::Disabled)?;
    let prompt = render_case_prompt(record);
    let reply = backend.complete(&prompt.text, raw_text)?;
    let terms = extract_terms(raw_text, lexicon);
    Ok(parse_model_reply(&reply, &terms, lexicon)?)
}

const VERDICT_WORDS: &[(&str, Verdict)] = &[
    ("yes", Verdict::Present),
    ("present", Verdict::Present),
    ("irrelevant", Verdict::NotInRecord),
    ("no", Verdict::Denied),
    ("denied", Verdict::Denied),
    ("denies", Verdict::Denied),
];

fn strip_list_marker(line: &str) -> &str {
    let line = line.trim().trim_start_matches(['-', '*', '•']).trim_start();
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 && matches!(line.as_bytes().get(digits), Some(b'.' | b')')) {
        return line[digits + 1..].trim_start();
    }
    line
}

/// Splits "Label: verdict[, inline details]" into its parts.
fn symptom_line(line: &str) -> Option<(&str, Verdict, &str)> {
    let (label, rest) = line.split_once(':')?;
    let rest = rest.trim();
    let word_end = rest.find(|c: char| !c.is_alphabetic()).unwrap_or(rest.len());
    let word = rest[..word_end].to_ascii_lowercase();
    let verdict = VERDICT_WORDS.iter().find(|(w, _)| *w == word)?.1;
    let inline = rest[word_end..].trim_start_matches([',', ';', '.', '-', ' ', '\u{2013}', '\u{2014}']).trim();
    Some((label.trim(), verdict, inline))
}

/// Parses replies of the form
///
/// ```text
/// Fever: Yes
/// Relevant Data: Temperature is 38.5°C, duration of 3 days.
/// Headache: Irrelevant
/// ```
///
/// Numbered labels (`Symptom 2: ...`) refer to `query_terms` by position;
/// other labels are canonicalized through the lexicon.
pub fn parse_model_reply(reply: &str, query_terms: &[String], lexicon: &Lexicon) -> Result<InquiryResponse, ParseError> {
    let fail = |reason: String| ParseError { reason, reply: reply.to_owned() };
    let mut verdicts: Vec<SymptomVerdict> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    // Index into `verdicts` of the entry that receives "Relevant Data" lines.
    let mut open: Option<usize> = None;

    for raw in reply.lines() {
        let cleaned = raw.replace("**", "");
        let line = strip_list_marker(&cleaned);
        if line.is_empty() {
            continue;
        }
        if let Some((label, data)) = line.split_once(':') {
            if normalize(label) == "relevant data" {
                let Some(i) = open else {
                    return Err(fail("relevant data without a preceding symptom".into()));
                };
                let details = &mut verdicts[i].details;
                if !details.is_empty() {
                    details.push(' ');
                }
                details.push_str(data.trim());
                continue;
            }
        }
        let Some((label, verdict, inline)) = symptom_line(line) else {
            open = None;
            continue;
        };

        let norm = normalize(label);
        let term = match norm.strip_prefix("symptom ").and_then(|n| n.parse::<usize>().ok()) {
            Some(n) => query_terms
                .get(n.wrapping_sub(1))
                .cloned()
                .ok_or_else(|| fail(format!("`{label}` has no matching query term")))?,
            None => lexicon.canonicalize(&norm).map(str::to_owned).unwrap_or(norm),
        };
        if term.is_empty() || !seen.insert(term.clone()) {
            open = None;
            continue;
        }
        verdicts.push(SymptomVerdict { term, verdict, details: inline.to_owned() });
        open = (verdict == Verdict::Present).then_some(verdicts.len() - 1);
    }

    if verdicts.is_empty() {
        if normalize(reply).contains("specify the symptom") {
            return Ok(InquiryResponse::clarification());
        }
        return Err(fail("no symptom lines".into()));
    }

    for v in &mut verdicts {
        match v.verdict {
            Verdict::Present if normalize(&v.details).starts_with("patient denies") => {
                v.verdict = Verdict::Denied;
                v.details = denial_sentence(&v.term);
            }
            Verdict::Present if v.details.trim().is_empty() => {
                return Err(fail(format!("`{}` is marked present without relevant data", v.term)));
            }
            Verdict::Present => {}
            Verdict::Denied => v.details = denial_sentence(&v.term),
            Verdict::NotInRecord => v.details.clear(),
        }
    }
    Ok(InquiryResponse::with_verdicts(verdicts))
}
