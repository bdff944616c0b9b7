//! Line-delimited JSON trace files.
//!
//! One record per line: `{"seq":1,"t_ms":0,"kind":"InstallApp","payload":{...}}`.
//! Blank lines are skipped. Unknown fields are rejected both on the record and
//! anywhere inside the payload, and every error names the physical line.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use aware_core::sim::{validate_order, EventKind, SimError};
use aware_core::ScenarioEvent;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace file not found: {0}")]
    NotFound(PathBuf),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("MalformedTrace at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    seq: u64,
    t_ms: u64,
    kind: String,
    payload: Value,
}

/// Finds a key in `input` that the canonical encoding does not have. Keys
/// carrying `null` are tolerated since absent options serialize that way.
fn unknown_field(input: &Value, canonical: &Value, path: &str) -> Option<String> {
    match (input, canonical) {
        (Value::Object(a), Value::Object(b)) => a.iter().find_map(|(k, v)| match b.get(k) {
            Some(c) => unknown_field(v, c, &format!("{path}.{k}")),
            None if v.is_null() => None,
            None => Some(format!("{path}.{k}")),
        }),
        (Value::Array(a), Value::Array(b)) => {
            a.iter().zip(b).enumerate().find_map(|(i, (v, c))| unknown_field(v, c, &format!("{path}[{i}]")))
        }
        _ => None,
    }
}

fn parse_record(text: &str) -> Result<ScenarioEvent, String> {
    let raw: RawRecord = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let tagged = serde_json::json!({ "kind": raw.kind, "payload": raw.payload });
    let kind: EventKind = serde_json::from_value(tagged).map_err(|e| e.to_string())?;
    let canonical = serde_json::to_value(&kind).map_err(|e| e.to_string())?;
    if let Some(field) = unknown_field(&raw.payload, &canonical["payload"], "payload") {
        return Err(format!("unknown field `{field}`"));
    }
    Ok(ScenarioEvent::new(raw.seq, raw.t_ms, kind))
}

/// Parses a whole trace and checks its ordering.
pub fn parse_trace(text: &str) -> Result<Vec<ScenarioEvent>, TraceError> {
    let mut events = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let ev = parse_record(line).map_err(|reason| TraceError::Malformed { line: i + 1, reason })?;
        events.push(ev);
        lines.push(i + 1);
    }
    validate_order(&events).map_err(|e| remap(e, &lines))?;
    Ok(events)
}

/// Turns an event index from the simulator into the physical line number.
pub fn remap(e: SimError, lines: &[usize]) -> TraceError {
    let physical = |n: usize| if n == 0 { 0 } else { lines.get(n - 1).copied().unwrap_or(n) };
    match e {
        SimError::MalformedTrace { line, reason } => TraceError::Malformed { line: physical(line), reason },
        SimError::Fatal { line, error } => TraceError::Malformed { line: physical(line), reason: error.to_string() },
    }
}

pub fn load_trace(path: &Path) -> Result<Vec<ScenarioEvent>, TraceError> {
    let text = fs::read_to_string(path).map_err(|source| match source.kind() {
        io::ErrorKind::NotFound => TraceError::NotFound(path.to_path_buf()),
        _ => TraceError::Io { path: path.to_path_buf(), source },
    })?;
    parse_trace(&text)
}

pub fn record_line(ev: &ScenarioEvent) -> String {
    let tagged = serde_json::to_value(&ev.kind).expect("event kinds always serialize");
    let raw = RawRecord {
        seq: ev.seq,
        t_ms: ev.t_ms,
        kind: tagged["kind"].as_str().unwrap_or_default().to_owned(),
        payload: tagged["payload"].clone(),
    };
    serde_json::to_string(&raw).expect("records always serialize")
}

pub fn to_jsonl(events: &[ScenarioEvent]) -> String {
    let mut out = String::new();
    for ev in events {
        out.push_str(&record_line(ev));
        out.push('\n');
    }
    out
}
