//! Line-delimited transcripts of completion calls and program executions.
//!
//! A transcript recorded from a live run can be replayed through
//! [`ScriptedProvider::from_transcript`](super::ScriptedProvider::from_transcript)
//! and [`ReplayExecutor`](crate::python_agent::ReplayExecutor). Hand-written
//! transcripts may omit `prompt_hash`/`source_hash`; such records match any
//! request with the same role and seed, in file order.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RoleTag;
use crate::python_agent::ExecStatus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub role_tag: RoleTag,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_hash: Option<String>,
    pub response: String,
    #[serde(default)]
    pub latency_ms: u64,
    #[serde(default)]
    pub provider: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_hash: Option<String>,
    pub status: ExecStatus,
    #[serde(default)]
    pub stdout: String,
    #[serde(default)]
    pub stderr: String,
    #[serde(default)]
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TranscriptRecord {
    Completion(CompletionRecord),
    Execution(ExecutionRecord),
}

/// Append-only log of a run's external interactions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TranscriptRecord) {
        self.records.push(record);
    }

    pub fn extend(&mut self, other: Transcript) {
        self.records.extend(other.records);
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn completions(&self) -> impl Iterator<Item = &CompletionRecord> {
        self.records.iter().filter_map(|r| match r {
            TranscriptRecord::Completion(c) => Some(c),
            _ => None,
        })
    }

    pub fn executions(&self) -> impl Iterator<Item = &ExecutionRecord> {
        self.records.iter().filter_map(|r| match r {
            TranscriptRecord::Execution(e) => Some(e),
            _ => None,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Transcript { records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        fs::write(path, self.to_jsonl())
    }

    pub fn load(path: impl AsRef<Path>) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_jsonl(&text).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_roundtrip() {
        let mut t = Transcript::new();
        t.push(TranscriptRecord::Completion(CompletionRecord {
            role_tag: RoleTag::Coder,
            seed: 3,
            prompt_hash: Some("abc".into()),
            response: "```python\nprint('[[1]]')\n```".into(),
            latency_ms: 12,
            provider: "scripted".into(),
        }));
        t.push(TranscriptRecord::Execution(ExecutionRecord {
            seed: Some(3),
            source_hash: None,
            status: ExecStatus::Ok,
            stdout: "[[1]]\n".into(),
            stderr: String::new(),
            duration_ms: 4,
        }));
        let text = t.to_jsonl();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains(r#""type":"completion""#));
        assert_eq!(Transcript::from_jsonl(&text).unwrap(), t);
    }

    #[test]
    fn minimal_hand_written_record() {
        let t = Transcript::from_jsonl(
            r#"{"type":"completion","role_tag":"planner","seed":1,"response":"step 1"}"#,
        )
        .unwrap();
        let c = t.completions().next().unwrap();
        assert_eq!(c.prompt_hash, None);
        assert_eq!(c.response, "step 1");
    }
}
