//! Newline-delimited JSON encoding of the session action log.

use super::ActionRecord;

#[derive(Debug, thiserror::Error)]
#[error("malformed log record at line {line}: {message}")]
pub struct LogError {
    pub line: usize,
    /// Sequence number of the offending record; the expected one when the
    /// record could not be read.
    pub seq: u64,
    pub message: String,
}

pub fn encode_record(record: &ActionRecord) -> String {
    let mut line = serde_json::to_string(record).expect("records serialize");
    line.push('\n');
    line
}

pub fn encode_log(records: &[ActionRecord]) -> String {
    records.iter().map(encode_record).collect()
}

/// Parses a log; blank lines are skipped. Sequence numbers must be
/// consecutive from 0.
pub fn decode_log(text: &str) -> Result<Vec<ActionRecord>, LogError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let expected = records.len() as u64;
        let record: ActionRecord = serde_json::from_str(line).map_err(|e| LogError {
            line: i + 1,
            seq: serde_json::from_str::<serde_json::Value>(line)
                .ok()
                .and_then(|v| v.get("seq")?.as_u64())
                .unwrap_or(expected),
            message: e.to_string(),
        })?;
        if record.seq != expected {
            return Err(LogError {
                line: i + 1,
                seq: record.seq,
                message: format!("expected seq {expected}, found {}", record.seq),
            });
        }
        records.push(record);
    }
    Ok(records)
}
