//! Text-to-program pipeline: reference extraction, specific-value
//! hypothesis, entity search, plan, code, execution and a bounded debug
//! loop.

mod executor;
mod pipeline;
pub mod prompts;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tabular::{normalize_text, DatasetNumber};

pub use executor::{
    ExecStatus, ExecutionOutcome, ExecutionRequest, Executor, ExecutorError, RecordingExecutor,
    ReplayExecutor, SandboxClient, ScriptedExecutor,
};
pub use pipeline::{
    debug_code, extract_entities, DebugInput, extract_references, generate_code, hypothesize_specific_value,
    make_plan, run_pipeline, Agents, PipelineConfig, PipelineError,
};

/// A question phrase linked to a column of one dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhraseColumnReference {
    pub phrase: String,
    pub column: String,
    pub dataset_number: DatasetNumber,
}

impl PhraseColumnReference {
    pub fn new(phrase: impl Into<String>, column: impl Into<String>, dataset_number: DatasetNumber) -> Self {
        PhraseColumnReference {
            phrase: phrase.into(),
            column: column.into(),
            dataset_number,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerFormat {
    #[serde(alias = "yes/no")]
    YesNo,
    #[serde(alias = "numerical", alias = "numeric")]
    Number,
    #[serde(alias = "single textual entity name", alias = "entity name")]
    Entity,
}

impl AnswerFormat {
    pub const ALL: [AnswerFormat; 3] = [AnswerFormat::YesNo, AnswerFormat::Number, AnswerFormat::Entity];

    /// Wording used inside prompts.
    pub fn prompt_token(self) -> &'static str {
        match self {
            AnswerFormat::YesNo => "yes/no",
            AnswerFormat::Number => "numerical",
            AnswerFormat::Entity => "single textual entity name",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AnswerFormat::YesNo => "yes_no",
            AnswerFormat::Number => "number",
            AnswerFormat::Entity => "entity",
        }
    }
}

impl fmt::Display for AnswerFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AnswerFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown answer type `{s}` (expected yes_no, number or entity)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Spatial,
    #[serde(alias = "functions")]
    Function,
    Personal,
    Temporal,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::Spatial, Category::Function, Category::Personal, Category::Temporal];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Spatial => "spatial",
            Category::Function => "function",
            Category::Personal => "personal",
            Category::Temporal => "temporal",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Category {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionSpec {
    pub id: String,
    pub question: String,
    pub category: Category,
    #[serde(rename = "answer_type")]
    pub answer_format: AnswerFormat,
}

#[derive(Debug, Error)]
pub enum QuestionFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate question id `{0}`")]
    DuplicateId(String),
}

/// One JSON object per line with `id`, `question`, `category`,
/// `answer_type`. Blank lines are skipped.
pub fn parse_questions(text: &str) -> Result<Vec<QuestionSpec>, QuestionFileError> {
    let mut out: Vec<QuestionSpec> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q: QuestionSpec = serde_json::from_str(line).map_err(|e| QuestionFileError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if out.iter().any(|o| o.id == q.id) {
            return Err(QuestionFileError::DuplicateId(q.id));
        }
        out.push(q);
    }
    Ok(out)
}

pub fn load_questions(path: impl AsRef<Path>) -> Result<Vec<QuestionSpec>, QuestionFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| QuestionFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_questions(&text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Plan {
    pub steps: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedProgram {
    pub source: String,
    pub attempt: u32,
}

/// A final answer after per-format normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", content = "value", rename_all = "snake_case")]
pub enum Answer {
    YesNo(bool),
    Number(f64),
    Entity(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{raw}` is not a valid {format} answer")]
pub struct AnswerParseError {
    pub raw: String,
    pub format: AnswerFormat,
}

/// Relative tolerance for numeric answer equality.
pub const NUMBER_TOLERANCE: f64 = 1e-6;

impl Answer {
    pub fn parse(raw: &str, format: AnswerFormat) -> Result<Answer, AnswerParseError> {
        let err = || AnswerParseError {
            raw: raw.to_string(),
            format,
        };
        let text = raw.trim().trim_end_matches('.').trim();
        match format {
            AnswerFormat::YesNo => match text.to_lowercase().as_str() {
                "yes" | "true" => Ok(Answer::YesNo(true)),
                "no" | "false" => Ok(Answer::YesNo(false)),
                _ => Err(err()),
            },
            AnswerFormat::Number => {
                let cleaned: String = text.chars().filter(|c| !matches!(c, ',' | '_' | ' ')).collect();
                cleaned
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .map(Answer::Number)
                    .ok_or_else(err)
            }
            AnswerFormat::Entity => {
                if text.is_empty() {
                    Err(err())
                } else {
                    Ok(Answer::Entity(text.to_string()))
                }
            }
        }
    }

    pub fn format(&self) -> AnswerFormat {
        match self {
            Answer::YesNo(_) => AnswerFormat::YesNo,
            Answer::Number(_) => AnswerFormat::Number,
            Answer::Entity(_) => AnswerFormat::Entity,
        }
    }

    /// Equality after normalization: numbers within [`NUMBER_TOLERANCE`]
    /// relative, entities after `normalize_text`.
    pub fn equivalent(&self, other: &Answer) -> bool {
        match (self, other) {
            (Answer::YesNo(a), Answer::YesNo(b)) => a == b,
            (Answer::Number(a), Answer::Number(b)) => {
                a == b || (a - b).abs() <= NUMBER_TOLERANCE * a.abs().max(b.abs())
            }
            (Answer::Entity(a), Answer::Entity(b)) => normalize_text(a) == normalize_text(b),
            _ => false,
        }
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::YesNo(true) => f.write_str("yes"),
            Answer::YesNo(false) => f.write_str("no"),
            Answer::Number(x) => write!(f, "{x}"),
            Answer::Entity(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Answered,
    /// Debug budget exhausted, or the final answer could not be parsed.
    Unanswerable,
    /// A provider or executor failure stopped the run.
    Aborted,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunStatus::Answered => "answered",
            RunStatus::Unanswerable => "unanswerable",
            RunStatus::Aborted => "aborted",
        })
    }
}

/// Outcome of one seeded pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub question_id: String,
    pub seed: u64,
    pub status: RunStatus,
    pub answer: Option<Answer>,
    pub program: Option<GeneratedProgram>,
    pub attempts_used: u32,
    pub info_score: Option<crate::consistency::InfoScore>,
    #[serde(default)]
    pub references: Vec<PhraseColumnReference>,
    #[serde(default)]
    pub entities: Vec<crate::entity_search::EntityMatch>,
    #[serde(default)]
    pub plan: Option<Plan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub(crate) fn empty(question_id: &str, seed: u64) -> Self {
        RunRecord {
            question_id: question_id.to_string(),
            seed,
            status: RunStatus::Aborted,
            answer: None,
            program: None,
            attempts_used: 0,
            info_score: None,
            references: Vec::new(),
            entities: Vec::new(),
            plan: None,
            error: None,
        }
    }

    pub fn is_answered(&self) -> bool {
        self.status == RunStatus::Answered
    }
}
