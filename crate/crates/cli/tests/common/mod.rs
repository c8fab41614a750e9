#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cadastre_core::llm::{CompletionRecord, ExecutionRecord, RoleTag, Transcript, TranscriptRecord};
use cadastre_core::python_agent::ExecStatus;

pub const CODE: &str = "```python\nprint(f\"The answer is: [[{len(df_1740)}]]\")\n```";

pub fn cadastre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cadastre"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

pub fn completion(role: RoleTag, seed: u64, response: &str) -> TranscriptRecord {
    TranscriptRecord::Completion(CompletionRecord {
        role_tag: role,
        seed,
        prompt_hash: None,
        response: response.to_string(),
        latency_ms: 0,
        provider: "hand-written".into(),
    })
}

pub fn execution(seed: u64, status: ExecStatus, stdout: &str) -> TranscriptRecord {
    TranscriptRecord::Execution(ExecutionRecord {
        seed: Some(seed),
        source_hash: None,
        status,
        stdout: stdout.to_string(),
        stderr: if status == ExecStatus::Error { "Traceback: boom".into() } else { String::new() },
        duration_ms: 5,
    })
}

/// One answered run without references: plan, code, one execution, judge.
pub fn simple_run(seed: u64, answer: &str, rows_used: u64) -> Vec<TranscriptRecord> {
    vec![
        completion(RoleTag::ColumnExtractor, seed, "No specific columns. Output: []"),
        completion(RoleTag::Planner, seed, "1. Load the data.\n2. Compute the answer."),
        completion(RoleTag::Coder, seed, CODE),
        execution(seed, ExecStatus::Ok, &format!("The answer is: [[{answer}]]\n")),
        completion(RoleTag::Judge, seed, &format!("The program reads every row. [[{rows_used}]]")),
    ]
}

pub fn save(records: Vec<TranscriptRecord>, path: &Path) {
    let mut t = Transcript::new();
    for r in records {
        t.push(r);
    }
    t.save(path).unwrap();
}

/// Fixture workspace written by the CLI itself.
pub fn fixture_dir(rows: usize) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = cadastre(&["generate-fixture", p(dir.path()), "--rows", &rows.to_string(), "--seeds", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}
