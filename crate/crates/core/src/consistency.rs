//! Reliability and accuracy measurement: multi-seed runs, execution
//! consistency (EC-2/EC-3), information-score conditioned consistency
//! classes, judge-extracted information scores, exact match and unigram
//! overlap, and grouped reports.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{self, parse_bracketed_answer, CompletionProvider, CompletionRequest, LlmError, RoleTag};
use crate::python_agent::{Answer, AnswerFormat, Category, QuestionSpec, RunRecord, RunStatus};
use crate::sql_agent::{
    answer_browsing, canonicalize_result, BrowseConfig, BrowseQuestion, CanonicalResult, ResultTable,
    Shot, SqlAgentError, SqlError, SqlStore,
};
use crate::tabular::{normalize_text, Dataset};

// ---------------------------------------------------------------------------
// Information score

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoScore {
    pub rows_used: u64,
    pub dataset_size: u64,
    pub coverage_ratio: f64,
    /// Set when more rows were reported than the primary dataset holds,
    /// which happens when the program joined several datasets.
    pub exceeds_dataset: bool,
}

impl InfoScore {
    pub fn new(rows_used: u64, dataset_size: u64) -> Self {
        let dataset_size = dataset_size.max(1);
        InfoScore {
            rows_used,
            dataset_size,
            coverage_ratio: rows_used as f64 / dataset_size as f64,
            exceeds_dataset: rows_used > dataset_size,
        }
    }
}

const JUDGE_SYSTEM_PROMPT: &str = "You are reviewing a data analysis program written to answer a question about historical tables.";

pub fn judge_prompt(source: &str, answer: &str) -> String {
    format!(
        "Below are a Python program and the answer it printed.\n\
         Determine how many rows of data the program used to produce its final answer, \
         that is, the length of the final dataset after all filtering and joining steps.\n\
         Reply with a single integer between [[ ]], for example [[120]].\n\n\
         Code:\n```python\n{source}\n```\n\nAnswer:\n{answer}\n\nNumber of rows used:\n"
    )
}

fn parse_row_count(reply: &str) -> Option<u64> {
    let span = parse_bracketed_answer(reply).ok()?;
    span.replace([',', '_'], "").trim().parse().ok()
}

/// Asks the judge for the number of rows the program relied on. Two
/// malformed replies leave the score absent.
pub fn extract_information_score(
    source: &str,
    answer: &str,
    dataset_size: usize,
    judge: &dyn CompletionProvider,
    seed: u64,
) -> Result<Option<InfoScore>, LlmError> {
    let req = CompletionRequest::new(RoleTag::Judge, JUDGE_SYSTEM_PROMPT, judge_prompt(source, answer), seed);
    for attempt in 0..2 {
        let reply = llm::complete(judge, &req)?;
        if let Some(n) = parse_row_count(&reply) {
            let score = InfoScore::new(n, dataset_size as u64);
            if score.exceeds_dataset {
                log::warn!("judge reports {n} rows for a dataset of {dataset_size}");
            }
            return Ok(Some(score));
        }
        log::warn!("judge reply {} has no row count: {:?}", attempt + 1, reply.trim());
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Multi-seed runs and classification

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeedCountError {
    #[error("exactly 3 seeds are required, got {0}")]
    WrongCount(usize),
    #[error("seed {0} is repeated")]
    Duplicate(u64),
}

pub fn validate_seeds(seeds: &[u64]) -> Result<[u64; 3], SeedCountError> {
    let arr: [u64; 3] = seeds.try_into().map_err(|_| SeedCountError::WrongCount(seeds.len()))?;
    let mut seen = HashSet::new();
    for s in arr {
        if !seen.insert(s) {
            return Err(SeedCountError::Duplicate(s));
        }
    }
    Ok(arr)
}

/// Three independent runs, one per seed, in seed order. Failed runs are
/// kept.
pub fn run_multi_seed(
    spec: &QuestionSpec,
    seeds: &[u64],
    mut pipeline: impl FnMut(&QuestionSpec, u64) -> RunRecord,
) -> Result<[RunRecord; 3], SeedCountError> {
    let seeds = validate_seeds(seeds)?;
    Ok(seeds.map(|s| pipeline(spec, s)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EcLevel {
    None,
    Ec2,
    Ec3,
}

impl fmt::Display for EcLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EcLevel::None => "none",
            EcLevel::Ec2 => "ec2",
            EcLevel::Ec3 => "ec3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsistencyClass {
    None,
    C22,
    C32,
    C33,
}

impl ConsistencyClass {
    pub const ALL: [ConsistencyClass; 4] = [
        ConsistencyClass::C33,
        ConsistencyClass::C32,
        ConsistencyClass::C22,
        ConsistencyClass::None,
    ];
}

impl fmt::Display for ConsistencyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConsistencyClass::None => "none",
            ConsistencyClass::C22 => "c22",
            ConsistencyClass::C32 => "c32",
            ConsistencyClass::C33 => "c33",
        })
    }
}

/// Run pairs in the order (0,1), (0,2), (1,2).
pub const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// From pairwise answer equality.
pub fn ec_level_from_pairs(answers_equal: [bool; 3]) -> EcLevel {
    if answers_equal.iter().all(|&b| b) {
        EcLevel::Ec3
    } else if answers_equal.iter().any(|&b| b) {
        EcLevel::Ec2
    } else {
        EcLevel::None
    }
}

/// From pairwise answer equality and pairwise info-score equality.
pub fn consistency_from_pairs(answers_equal: [bool; 3], scores_equal: [bool; 3]) -> ConsistencyClass {
    let all_answers = answers_equal.iter().all(|&b| b);
    if all_answers && scores_equal.iter().all(|&b| b) {
        ConsistencyClass::C33
    } else if all_answers && scores_equal.iter().any(|&b| b) {
        ConsistencyClass::C32
    } else if (0..3).any(|i| answers_equal[i] && scores_equal[i]) {
        ConsistencyClass::C22
    } else {
        ConsistencyClass::None
    }
}

fn answers_equal(a: &RunRecord, b: &RunRecord) -> bool {
    match (&a.answer, &b.answer) {
        (Some(x), Some(y)) if a.is_answered() && b.is_answered() => x.equivalent(y),
        _ => false,
    }
}

fn scores_equal(a: &RunRecord, b: &RunRecord) -> bool {
    matches!((&a.info_score, &b.info_score), (Some(x), Some(y)) if x.rows_used == y.rows_used)
}

fn pairwise(records: &[RunRecord; 3], eq: fn(&RunRecord, &RunRecord) -> bool) -> [bool; 3] {
    PAIRS.map(|(i, j)| eq(&records[i], &records[j]))
}

pub fn classify_execution_consistency(records: &[RunRecord; 3]) -> EcLevel {
    ec_level_from_pairs(pairwise(records, answers_equal))
}

pub fn classify_consistency(records: &[RunRecord; 3]) -> ConsistencyClass {
    consistency_from_pairs(pairwise(records, answers_equal), pairwise(records, scores_equal))
}

// ---------------------------------------------------------------------------
// Accuracy metrics

#[derive(Debug, Clone, PartialEq)]
pub enum Comparable {
    Table(ResultTable),
    Answer(Answer),
}

impl Comparable {
    fn kind(&self) -> &'static str {
        match self {
            Comparable::Table(_) => "table",
            Comparable::Answer(a) => a.format().as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot compare a {left} with a {right}")]
pub struct KindMismatch {
    pub left: &'static str,
    pub right: &'static str,
}

pub fn exact_match(pred: &Comparable, gt: &Comparable) -> Result<bool, KindMismatch> {
    match (pred, gt) {
        (Comparable::Table(a), Comparable::Table(b)) => Ok(canonicalize_result(a) == canonicalize_result(b)),
        (Comparable::Answer(a), Comparable::Answer(b)) if a.format() == b.format() => Ok(a.equivalent(b)),
        _ => Err(KindMismatch {
            left: pred.kind(),
            right: gt.kind(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OverlapError {
    #[error("ground truth has no tokens")]
    EmptyGroundTruth,
}

pub fn tokenize(text: &str) -> Vec<String> {
    normalize_text(text)
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Share of ground-truth tokens (with multiplicity) that also occur in the
/// prediction.
pub fn unigram_overlap(pred: &str, gt: &str) -> Result<f64, OverlapError> {
    let gt_tokens = tokenize(gt);
    if gt_tokens.is_empty() {
        return Err(OverlapError::EmptyGroundTruth);
    }
    let mut available: BTreeMap<String, usize> = BTreeMap::new();
    for t in tokenize(pred) {
        *available.entry(t).or_default() += 1;
    }
    let hits = gt_tokens
        .iter()
        .filter(|t| match available.get_mut(*t) {
            Some(n) if *n > 0 => {
                *n -= 1;
                true
            }
            _ => false,
        })
        .count();
    Ok(hits as f64 / gt_tokens.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub question_id: String,
    pub predicted_sql: Option<String>,
    pub predicted: Option<String>,
    pub expected: String,
    pub exact_match: bool,
    pub unigram_overlap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sql_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub shots: usize,
    pub k: usize,
    pub seed: u64,
    pub results: Vec<EvalResult>,
    pub exact_match_rate: f64,
    pub mean_overlap: f64,
    pub sql_errors: usize,
}

impl SuiteReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>5} {:>8}  {}", "question", "EM", "overlap", "note");
        for r in &self.results {
            let _ = writeln!(
                out,
                "{:<10} {:>5} {:>8.3}  {}",
                r.question_id,
                if r.exact_match { "yes" } else { "no" },
                r.unigram_overlap,
                r.sql_error.as_deref().map_or(String::new(), |e| format!("SQL error: {e}"))
            );
        }
        let _ = writeln!(
            out,
            "{}-shot, k={}: EM {:.3}, mean overlap {:.3}, SQL errors {}",
            self.shots, self.k, self.exact_match_rate, self.mean_overlap, self.sql_errors
        );
        out
    }
}

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("question {0} has no ground-truth SQL")]
    MissingGroundTruth(String),
    #[error("ground-truth SQL of {id} failed: {source}")]
    GroundTruth { id: String, source: SqlError },
    #[error(transparent)]
    Store(#[from] SqlError),
    #[error(transparent)]
    Agent(SqlAgentError),
}

fn overlap_of(pred: &CanonicalResult, gt: &CanonicalResult, exact: bool) -> f64 {
    if exact {
        return 1.0;
    }
    unigram_overlap(&pred.render_text(), &gt.render_text()).unwrap_or_else(|e| {
        log::warn!("overlap undefined ({e}); scoring 0");
        0.0
    })
}

/// Runs the browsing agent on every question and scores it against the
/// result of the annotated SQL. Results are sorted by question id.
pub fn evaluate_browsing_suite(
    questions: &[BrowseQuestion],
    dataset: &Dataset,
    shots: &[Shot],
    config: BrowseConfig,
    provider: &dyn CompletionProvider,
) -> Result<SuiteReport, SuiteError> {
    let store = SqlStore::open(dataset)?;
    let schema = dataset.schema();
    let mut results = Vec::with_capacity(questions.len());
    for q in questions {
        let gt_sql = q
            .gt_sql
            .as_deref()
            .ok_or_else(|| SuiteError::MissingGroundTruth(q.id.clone()))?;
        let gt = store.execute(gt_sql).map_err(|source| SuiteError::GroundTruth {
            id: q.id.clone(),
            source,
        })?;
        let gt_canon = canonicalize_result(&gt);
        let result = match answer_browsing(&q.question, &store, schema, shots, config, provider) {
            Ok(out) => {
                let exact = out.canonical == gt_canon;
                EvalResult {
                    question_id: q.id.clone(),
                    predicted_sql: Some(out.sql),
                    predicted: Some(out.canonical.render_text()),
                    expected: gt_canon.render_text(),
                    exact_match: exact,
                    unigram_overlap: overlap_of(&out.canonical, &gt_canon, exact),
                    sql_error: None,
                }
            }
            Err(SqlAgentError::Sql(e)) => EvalResult {
                question_id: q.id.clone(),
                predicted_sql: None,
                predicted: None,
                expected: gt_canon.render_text(),
                exact_match: false,
                unigram_overlap: 0.0,
                sql_error: Some(e.message),
            },
            Err(e) => return Err(SuiteError::Agent(e)),
        };
        results.push(result);
    }
    results.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    let n = results.len().max(1) as f64;
    Ok(SuiteReport {
        shots: shots.len(),
        k: config.k,
        seed: config.seed,
        exact_match_rate: results.iter().filter(|r| r.exact_match).count() as f64 / n,
        mean_overlap: results.iter().map(|r| r.unigram_overlap).sum::<f64>() / n,
        sql_errors: results.iter().filter(|r| r.sql_error.is_some()).count(),
        results,
    })
}

// ---------------------------------------------------------------------------
// Grouped reports

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionConsistency {
    pub question_id: String,
    pub category: Category,
    pub answer_type: AnswerFormat,
    pub statuses: [RunStatus; 3],
    pub answers: [Option<String>; 3],
    pub info_scores: [Option<u64>; 3],
    pub coverage_ratios: [Option<f64>; 3],
    /// Some reported row count exceeded the primary dataset size.
    pub coverage_flagged: bool,
    pub ec_level: EcLevel,
    pub consistency_class: ConsistencyClass,
}

pub fn summarize_question(spec: &QuestionSpec, records: &[RunRecord; 3]) -> QuestionConsistency {
    QuestionConsistency {
        question_id: spec.id.clone(),
        category: spec.category,
        answer_type: spec.answer_format,
        statuses: records.each_ref().map(|r| r.status),
        answers: records.each_ref().map(|r| r.answer.as_ref().map(Answer::to_string)),
        info_scores: records.each_ref().map(|r| r.info_score.map(|s| s.rows_used)),
        coverage_ratios: records.each_ref().map(|r| r.info_score.map(|s| s.coverage_ratio)),
        coverage_flagged: records
            .iter()
            .any(|r| r.info_score.is_some_and(|s| s.exceeds_dataset)),
        ec_level: classify_execution_consistency(records),
        consistency_class: classify_consistency(records),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub c33: usize,
    pub c32: usize,
    pub c22: usize,
    pub none: usize,
}

impl ClassCounts {
    fn add(&mut self, c: ConsistencyClass) {
        match c {
            ConsistencyClass::C33 => self.c33 += 1,
            ConsistencyClass::C32 => self.c32 += 1,
            ConsistencyClass::C22 => self.c22 += 1,
            ConsistencyClass::None => self.none += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub group: String,
    pub questions: usize,
    pub ec3_rate: f64,
    /// Share with at least two agreeing runs (EC-3 included).
    pub ec2_rate: f64,
    pub classes: ClassCounts,
}

fn group_stats(group: &str, items: &[&QuestionConsistency]) -> GroupStats {
    let n = items.len() as f64;
    let mut classes = ClassCounts::default();
    for q in items {
        classes.add(q.consistency_class);
    }
    GroupStats {
        group: group.to_string(),
        questions: items.len(),
        ec3_rate: items.iter().filter(|q| q.ec_level == EcLevel::Ec3).count() as f64 / n,
        ec2_rate: items.iter().filter(|q| q.ec_level >= EcLevel::Ec2).count() as f64 / n,
        classes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub seeds: [u64; 3],
    pub questions: Vec<QuestionConsistency>,
    pub overall: Option<GroupStats>,
    pub by_category: Vec<GroupStats>,
    pub by_answer_type: Vec<GroupStats>,
    pub excluded_groups: Vec<String>,
}

/// Per-group EC rates and class distributions. Groups with no questions
/// are left out and listed in `excluded_groups`.
pub fn grouped_consistency_report(seeds: [u64; 3], mut questions: Vec<QuestionConsistency>) -> ConsistencyReport {
    questions.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    let mut excluded = Vec::new();
    let mut grouped = |label: String, members: Vec<&QuestionConsistency>| {
        if members.is_empty() {
            log::warn!("group {label} has no questions; excluded from the report");
            excluded.push(label);
            None
        } else {
            Some(group_stats(&label, &members))
        }
    };
    let by_category: Vec<GroupStats> = Category::ALL
        .iter()
        .filter_map(|c| {
            grouped(
                format!("category:{c}"),
                questions.iter().filter(|q| q.category == *c).collect(),
            )
        })
        .collect();
    let by_answer_type: Vec<GroupStats> = AnswerFormat::ALL
        .iter()
        .filter_map(|f| {
            grouped(
                format!("answer_type:{f}"),
                questions.iter().filter(|q| q.answer_type == *f).collect(),
            )
        })
        .collect();
    let overall = (!questions.is_empty()).then(|| group_stats("overall", &questions.iter().collect::<Vec<_>>()));
    ConsistencyReport {
        seeds,
        questions,
        overall,
        by_category,
        by_answer_type,
        excluded_groups: excluded,
    }
}

impl ConsistencyReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let [a, b, c] = self.seeds;
        let _ = writeln!(out, "seeds {a}, {b}, {c}");
        let rows: Vec<(String, String)> = self
            .questions
            .iter()
            .map(|q| {
                let answers: Vec<String> = q
                    .answers
                    .iter()
                    .zip(&q.statuses)
                    .map(|(a, s)| a.clone().unwrap_or_else(|| format!("<{s}>")))
                    .collect();
                let scores: Vec<String> = q
                    .info_scores
                    .iter()
                    .map(|s| s.map_or("-".into(), |n| n.to_string()))
                    .collect();
                (answers.join(" | "), scores.join(" | "))
            })
            .collect();
        let id_w = self.questions.iter().map(|q| q.question_id.chars().count()).max().unwrap_or(0).max(8);
        let ans_w = rows.iter().map(|r| r.0.chars().count()).max().unwrap_or(0).max(7);
        let score_w = rows.iter().map(|r| r.1.chars().count()).max().unwrap_or(0).max(11);
        let _ = writeln!(
            out,
            "{:<id_w$}  {:<ans_w$}  {:<score_w$}  {:<4}  {}",
            "question", "answers", "info scores", "EC", "class"
        );
        for (q, (answers, scores)) in self.questions.iter().zip(&rows) {
            let _ = writeln!(
                out,
                "{:<id_w$}  {:<ans_w$}  {:<score_w$}  {:<4}  {}{}",
                q.question_id,
                answers,
                scores,
                q.ec_level.to_string(),
                q.consistency_class,
                if q.coverage_flagged { "  (coverage > 1)" } else { "" }
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<22} {:>3} {:>6} {:>6} {:>4} {:>4} {:>4} {:>4}",
            "group", "n", "EC-3", "EC-2", "c33", "c32", "c22", "none"
        );
        for g in self.overall.iter().chain(&self.by_category).chain(&self.by_answer_type) {
            let _ = writeln!(
                out,
                "{:<22} {:>3} {:>6.3} {:>6.3} {:>4} {:>4} {:>4} {:>4}",
                g.group, g.questions, g.ec3_rate, g.ec2_rate, g.classes.c33, g.classes.c32, g.classes.c22, g.classes.none
            );
        }
        for e in &self.excluded_groups {
            let _ = writeln!(out, "excluded (no questions): {e}");
        }
        out
    }
}
