//! Program executors: the sandbox runner client (one child process per
//! request, JSON line in, JSON line out) and offline stand-ins for tests and
//! replays.

use std::collections::{BTreeMap, VecDeque};
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::mock::KeyedQueues;
use crate::llm::{content_hash, parse_bracketed_answer, ExecutionRecord, Transcript, TranscriptRecord};
use crate::tabular::DatasetNumber;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecStatus {
    Ok,
    Error,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecStatus,
    pub stdout: String,
    pub stderr: String,
    /// Content of the last `[[...]]` marker on stdout, for successful runs.
    pub final_answer: Option<String>,
    pub duration_ms: u64,
}

impl ExecutionOutcome {
    pub fn new(status: ExecStatus, stdout: impl Into<String>, stderr: impl Into<String>, duration_ms: u64) -> Self {
        let stdout = stdout.into();
        let final_answer = match status {
            ExecStatus::Ok => parse_bracketed_answer(&stdout).ok(),
            _ => None,
        };
        ExecutionOutcome {
            status,
            stdout,
            stderr: stderr.into(),
            final_answer,
            duration_ms,
        }
    }

    pub fn ok(stdout: impl Into<String>) -> Self {
        Self::new(ExecStatus::Ok, stdout, "", 0)
    }

    pub fn error(stderr: impl Into<String>) -> Self {
        Self::new(ExecStatus::Error, "", stderr, 0)
    }

    pub fn timeout() -> Self {
        Self::new(ExecStatus::Timeout, "", "execution timed out", 0)
    }

    fn from_record(r: &ExecutionRecord) -> Self {
        Self::new(r.status, r.stdout.clone(), r.stderr.clone(), r.duration_ms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionRequest {
    pub source: String,
    pub dataset_paths: BTreeMap<DatasetNumber, PathBuf>,
    pub timeout_s: f64,
    /// Seed of the run that produced the program; used for replay lookup
    /// only, never sent to the runner.
    pub seed: u64,
}

impl ExecutionRequest {
    pub fn source_hash(&self) -> String {
        content_hash(&self.source)
    }

    /// The request line sent to the runner.
    pub fn wire_json(&self) -> String {
        let paths: BTreeMap<String, String> = self
            .dataset_paths
            .iter()
            .map(|(n, p)| (n.to_string(), p.display().to_string()))
            .collect();
        serde_json::json!({
            "source": self.source,
            "dataset_paths": paths,
            "timeout_s": self.timeout_s,
        })
        .to_string()
    }
}

/// Failures of the execution infrastructure itself, as opposed to failures
/// of the submitted program.
#[derive(Debug, Error)]
pub enum ExecutorError {
    #[error("could not start runner `{command}`: {source}")]
    Spawn { command: String, source: std::io::Error },
    #[error("runner protocol error: {0}")]
    Protocol(String),
    #[error("no scripted execution outcome left")]
    Exhausted,
}

pub trait Executor: Send + Sync {
    fn execute(&self, request: &ExecutionRequest) -> Result<ExecutionOutcome, ExecutorError>;
}

impl<E: Executor + ?Sized> Executor for &E {
    fn execute(&self, request: &ExecutionRequest) -> Result<ExecutionOutcome, ExecutorError> {
        (**self).execute(request)
    }
}

/// Serves queued outcomes in order, ignoring the program.
#[derive(Debug, Default)]
pub struct ScriptedExecutor {
    outcomes: Mutex<VecDeque<ExecutionOutcome>>,
    requests: Mutex<Vec<ExecutionRequest>>,
}

impl ScriptedExecutor {
    pub fn new(outcomes: impl IntoIterator<Item = ExecutionOutcome>) -> Self {
        ScriptedExecutor {
            outcomes: Mutex::new(outcomes.into_iter().collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    /// `failures` errors followed by one success printing `final_stdout`.
    pub fn failing_then_ok(failures: usize, final_stdout: &str) -> Self {
        let mut v: Vec<ExecutionOutcome> = (0..failures)
            .map(|i| ExecutionOutcome::error(format!("Traceback: scripted failure {}", i + 1)))
            .collect();
        v.push(ExecutionOutcome::ok(final_stdout));
        Self::new(v)
    }

    pub fn calls(&self) -> usize {
        self.requests.lock().unwrap().len()
    }

    pub fn requests(&self) -> Vec<ExecutionRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl Executor for ScriptedExecutor {
    fn execute(&self, request: &ExecutionRequest) -> Result<ExecutionOutcome, ExecutorError> {
        self.requests.lock().unwrap().push(request.clone());
        self.outcomes.lock().unwrap().pop_front().ok_or(ExecutorError::Exhausted)
    }
}

/// Replays the execution records of a transcript, matched by
/// (seed, source hash), then seed, then source hash, then file order.
#[derive(Debug, Default)]
pub struct ReplayExecutor {
    queues: KeyedQueues<(Option<u64>, Option<String>), ExecutionOutcome>,
}

impl ReplayExecutor {
    pub fn from_transcript(transcript: &Transcript) -> Self {
        let r = Self::default();
        for e in transcript.executions() {
            r.queues
                .push((e.seed, e.source_hash.clone()), ExecutionOutcome::from_record(e));
        }
        r
    }

    pub fn remaining(&self) -> usize {
        self.queues.remaining()
    }
}

impl Executor for ReplayExecutor {
    fn execute(&self, request: &ExecutionRequest) -> Result<ExecutionOutcome, ExecutorError> {
        let hash = request.source_hash();
        let seed = request.seed;
        self.queues
            .pop([
                (Some(seed), Some(hash.clone())),
                (Some(seed), None),
                (None, Some(hash)),
                (None, None),
            ])
            .ok_or(ExecutorError::Exhausted)
    }
}

/// Wraps an executor and logs every outcome as a transcript record.
pub struct RecordingExecutor<E> {
    inner: E,
    transcript: Mutex<Transcript>,
}

impl<E: Executor> RecordingExecutor<E> {
    pub fn new(inner: E) -> Self {
        RecordingExecutor {
            inner,
            transcript: Mutex::new(Transcript::new()),
        }
    }

    pub fn transcript(&self) -> Transcript {
        self.transcript.lock().unwrap().clone()
    }
}

impl<E: Executor> Executor for RecordingExecutor<E> {
    fn execute(&self, request: &ExecutionRequest) -> Result<ExecutionOutcome, ExecutorError> {
        let out = self.inner.execute(request)?;
        self.transcript
            .lock()
            .unwrap()
            .push(TranscriptRecord::Execution(ExecutionRecord {
                seed: Some(request.seed),
                source_hash: Some(request.source_hash()),
                status: out.status,
                stdout: out.stdout.clone(),
                stderr: out.stderr.clone(),
                duration_ms: out.duration_ms,
            }));
        Ok(out)
    }
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    status: ExecStatus,
    stdout: String,
    stderr: String,
    duration_ms: u64,
}

/// Client for the external sandbox runner. Each request spawns the runner
/// command, writes one request line to its stdin and reads one response
/// line from its stdout.
#[derive(Debug, Clone)]
pub struct SandboxClient {
    program: String,
    args: Vec<String>,
    /// Extra time allowed beyond the request timeout before the runner
    /// itself is killed.
    grace: Duration,
}

impl SandboxClient {
    pub fn new(program: impl Into<String>, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        SandboxClient {
            program: program.into(),
            args: args.into_iter().map(Into::into).collect(),
            grace: Duration::from_secs(5),
        }
    }

    /// Parses a whitespace-separated command line such as
    /// `python3 -m sandbox_runner`.
    pub fn from_command_line(command: &str) -> Option<Self> {
        let mut parts = command.split_whitespace();
        let program = parts.next()?;
        Some(Self::new(program, parts))
    }

    pub fn with_grace(mut self, grace: Duration) -> Self {
        self.grace = grace;
        self
    }

    fn command_line(&self) -> String {
        std::iter::once(self.program.as_str())
            .chain(self.args.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

fn drain<R: Read + Send + 'static>(mut r: R) -> std::thread::JoinHandle<Vec<u8>> {
    std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        buf
    })
}

impl Executor for SandboxClient {
    fn execute(&self, request: &ExecutionRequest) -> Result<ExecutionOutcome, ExecutorError> {
        let started = Instant::now();
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| ExecutorError::Spawn {
                command: self.command_line(),
                source,
            })?;
        let out = drain(child.stdout.take().expect("piped stdout"));
        let err = drain(child.stderr.take().expect("piped stderr"));
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            let line = request.wire_json() + "\n";
            if let Err(e) = stdin.write_all(line.as_bytes()) {
                log::warn!("writing request to runner failed: {e}");
            }
        }

        let deadline = started + Duration::from_secs_f64(request.timeout_s.max(0.0)) + self.grace;
        let status = loop {
            if let Some(s) = child
                .try_wait()
                .map_err(|e| ExecutorError::Protocol(e.to_string()))?
            {
                break Some(s);
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            std::thread::sleep(Duration::from_millis(10));
        };
        let stdout = String::from_utf8_lossy(&out.join().unwrap_or_default()).into_owned();
        let stderr = String::from_utf8_lossy(&err.join().unwrap_or_default()).into_owned();
        let elapsed = started.elapsed().as_millis() as u64;

        let Some(status) = status else {
            return Ok(ExecutionOutcome::new(
                ExecStatus::Timeout,
                "",
                format!("runner did not answer within {:.1} s and was killed", request.timeout_s),
                elapsed,
            ));
        };
        if !status.success() {
            return Err(ExecutorError::Protocol(format!(
                "runner exited with {status}: {}",
                stderr.trim()
            )));
        }
        let line = stdout
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| ExecutorError::Protocol("runner wrote no response".into()))?;
        let resp: WireResponse = serde_json::from_str(line)
            .map_err(|e| ExecutorError::Protocol(format!("malformed response `{line}`: {e}")))?;
        Ok(ExecutionOutcome::new(resp.status, resp.stdout, resp.stderr, resp.duration_ms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(source: &str, seed: u64) -> ExecutionRequest {
        ExecutionRequest {
            source: source.into(),
            dataset_paths: BTreeMap::from([(DatasetNumber::FIRST, PathBuf::from("/data/a.csv"))]),
            timeout_s: 2.0,
            seed,
        }
    }

    #[test]
    fn final_answer_only_on_ok() {
        assert_eq!(
            ExecutionOutcome::ok("log\nThe answer is: [[42]]\n").final_answer.as_deref(),
            Some("42")
        );
        assert_eq!(ExecutionOutcome::ok("no marker").final_answer, None);
        assert_eq!(
            ExecutionOutcome::new(ExecStatus::Error, "[[1]]", "boom", 0).final_answer,
            None
        );
    }

    #[test]
    fn wire_request_field_names() {
        let v: serde_json::Value = serde_json::from_str(&request("print(1)", 7).wire_json()).unwrap();
        let obj = v.as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["dataset_paths", "source", "timeout_s"]);
        assert_eq!(v["dataset_paths"]["1"], "/data/a.csv");
        assert_eq!(v["timeout_s"], 2.0);
    }

    #[test]
    fn scripted_in_order_then_exhausted() {
        let ex = ScriptedExecutor::failing_then_ok(1, "[[yes]]");
        assert_eq!(ex.execute(&request("a", 0)).unwrap().status, ExecStatus::Error);
        assert_eq!(ex.execute(&request("b", 0)).unwrap().final_answer.as_deref(), Some("yes"));
        assert!(matches!(ex.execute(&request("c", 0)), Err(ExecutorError::Exhausted)));
        assert_eq!(ex.calls(), 3);
    }

    #[test]
    fn replay_prefers_exact_key() {
        let rec = RecordingExecutor::new(ScriptedExecutor::new([
            ExecutionOutcome::ok("[[1]]"),
            ExecutionOutcome::ok("[[2]]"),
        ]));
        rec.execute(&request("x = 1", 1)).unwrap();
        rec.execute(&request("x = 2", 2)).unwrap();
        let replay = ReplayExecutor::from_transcript(&rec.transcript());
        assert_eq!(replay.execute(&request("x = 2", 2)).unwrap().final_answer.as_deref(), Some("2"));
        assert_eq!(replay.execute(&request("x = 1", 1)).unwrap().final_answer.as_deref(), Some("1"));
        assert_eq!(replay.remaining(), 0);
    }

    #[test]
    fn replay_wildcard_records() {
        let t = Transcript::from_jsonl(
            "{\"type\":\"execution\",\"status\":\"error\",\"stderr\":\"KeyError\"}\n\
             {\"type\":\"execution\",\"seed\":5,\"status\":\"ok\",\"stdout\":\"[[no]]\"}\n",
        )
        .unwrap();
        let replay = ReplayExecutor::from_transcript(&t);
        assert_eq!(replay.execute(&request("anything", 5)).unwrap().status, ExecStatus::Ok);
        assert_eq!(replay.execute(&request("anything", 9)).unwrap().status, ExecStatus::Error);
        assert!(replay.execute(&request("anything", 9)).is_err());
    }

    #[cfg(unix)]
    fn fake_runner(dir: &std::path::Path, body: &str) -> SandboxClient {
        use std::os::unix::fs::PermissionsExt;
        let path = dir.join("runner.sh");
        std::fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
        std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
        SandboxClient::new(path.display().to_string(), Vec::<String>::new())
    }

    #[cfg(unix)]
    #[test]
    fn sandbox_client_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let captured = dir.path().join("req.json");
        let client = fake_runner(
            dir.path(),
            &format!(
                "cat > {}\nprintf '%s\\n' '{{\"status\": \"ok\", \"stdout\": \"The answer is: [[5]]\\n\", \"stderr\": \"\", \"duration_ms\": 12}}'",
                captured.display()
            ),
        );
        let out = client.execute(&request("print(5)", 0)).unwrap();
        assert_eq!(out.status, ExecStatus::Ok);
        assert_eq!(out.final_answer.as_deref(), Some("5"));
        assert_eq!(out.duration_ms, 12);
        let sent = std::fs::read_to_string(&captured).unwrap();
        assert_eq!(sent.lines().count(), 1);
        let v: serde_json::Value = serde_json::from_str(sent.trim()).unwrap();
        assert_eq!(v["source"], "print(5)");
    }

    #[cfg(unix)]
    #[test]
    fn sandbox_client_protocol_errors() {
        let dir = tempfile::tempdir().unwrap();
        let garbage = fake_runner(dir.path(), "cat > /dev/null; echo not-json");
        assert!(matches!(
            garbage.execute(&request("x", 0)),
            Err(ExecutorError::Protocol(_))
        ));
        let crashing = fake_runner(dir.path(), "cat > /dev/null; echo oops >&2; exit 3");
        assert!(matches!(
            crashing.execute(&request("x", 0)),
            Err(ExecutorError::Protocol(m)) if m.contains("oops")
        ));
        let missing = SandboxClient::new("/nonexistent/runner", Vec::<String>::new());
        assert!(matches!(missing.execute(&request("x", 0)), Err(ExecutorError::Spawn { .. })));
    }

    #[cfg(unix)]
    #[test]
    fn sandbox_client_kills_hung_runner() {
        let dir = tempfile::tempdir().unwrap();
        let client = fake_runner(dir.path(), "cat > /dev/null; exec sleep 30")
            .with_grace(Duration::from_millis(200));
        let mut req = request("x", 0);
        req.timeout_s = 0.1;
        let t = Instant::now();
        let out = client.execute(&req).unwrap();
        assert_eq!(out.status, ExecStatus::Timeout);
        assert!(t.elapsed() < Duration::from_secs(5));
    }
}
