//! Browsing pipeline: schema-rendered text-to-SQL prompt, k sampled
//! candidates, majority vote over canonical execution results, execution of
//! the winner against an in-memory SQLite copy of the table.

use std::fmt;
use std::path::Path;

use rusqlite::types::ValueRef;
use rusqlite::Connection;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{self, extract_code_block, CompletionProvider, CompletionRequest, LlmError, RoleTag};
use crate::tabular::{normalize_text, Dataset, TableSchema, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct SqlError {
    pub message: String,
}

impl SqlError {
    fn new(message: impl fmt::Display) -> Self {
        SqlError {
            message: message.to_string(),
        }
    }
}

impl From<rusqlite::Error> for SqlError {
    fn from(e: rusqlite::Error) -> Self {
        SqlError::new(e)
    }
}

#[derive(Debug, Error)]
pub enum SqlAgentError {
    #[error("shot count must be 0 or 3, got {0}")]
    BadShotCount(usize),
    #[error("SQL error: {0}")]
    Sql(#[from] SqlError),
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error("no candidate queries to vote on")]
    EmptySlate,
    #[error("questions file: {0}")]
    Questions(String),
}

// ---------------------------------------------------------------------------
// Prompt

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    pub question: String,
    pub sql: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SqlPrompt {
    pub schema_block: String,
    pub column_info_block: String,
    pub primary_key_line: String,
    pub shots: Vec<Shot>,
    pub question: String,
}

impl SqlPrompt {
    fn section(&self, question: &str) -> String {
        format!(
            "database schema:\n{}\ncolumn info:\n{}\n{}\nquestion:\n{}\n",
            self.schema_block, self.column_info_block, self.primary_key_line, question
        )
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for shot in &self.shots {
            out.push_str(&self.section(&shot.question));
            out.push_str(shot.sql.trim());
            out.push_str("\n\n");
        }
        out.push_str(&self.section(&self.question));
        out
    }
}

impl fmt::Display for SqlPrompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

pub fn build_prompt(
    schema: &TableSchema,
    question: &str,
    shots: &[Shot],
) -> Result<SqlPrompt, SqlAgentError> {
    if !matches!(shots.len(), 0 | 3) {
        return Err(SqlAgentError::BadShotCount(shots.len()));
    }
    let table = &schema.table_name;
    let columns: Vec<String> = schema
        .columns
        .iter()
        .map(|c| format!("{table}.{} ( {} )", c.name, c.kind.sql_type()))
        .collect();
    let info: Vec<String> = schema
        .columns
        .iter()
        .map(|c| format!("{} -- {}", c.name, c.description))
        .collect();
    Ok(SqlPrompt {
        schema_block: format!("table {table} , columns = [ {} ]", columns.join(" , ")),
        column_info_block: info.join(" ; "),
        primary_key_line: format!("primary key : {table}.{}", schema.primary_key),
        shots: shots.to_vec(),
        question: question.to_string(),
    })
}

const SQL_SYSTEM_PROMPT: &str =
    "Translate the question into one SQLite query over the described table. Reply with the query only.";

/// The three repo-authored in-context exemplars for the catastici table.
pub fn default_shots() -> Vec<Shot> {
    serde_json::from_str(include_str!("../data/sql_shots.json")).expect("bundled shots parse")
}

// ---------------------------------------------------------------------------
// Execution

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// Read-only SQLite view of one dataset.
pub struct SqlStore {
    conn: Connection,
    table: String,
}

fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

impl SqlStore {
    pub fn open(dataset: &Dataset) -> Result<Self, SqlError> {
        let mut conn = Connection::open_in_memory()?;
        let schema = dataset.schema();
        let cols: Vec<String> = schema
            .columns
            .iter()
            .map(|c| format!("{} {}", quote_ident(&c.name), c.kind.sql_type()))
            .collect();
        let table = quote_ident(&schema.table_name);
        conn.execute(&format!("CREATE TABLE {table} ({})", cols.join(", ")), [])?;
        {
            let tx = conn.transaction()?;
            {
                let placeholders = vec!["?"; schema.columns.len()].join(", ");
                let mut stmt =
                    tx.prepare(&format!("INSERT INTO {table} VALUES ({placeholders})"))?;
                for row in dataset.rows() {
                    let params: Vec<rusqlite::types::Value> = row
                        .iter()
                        .map(|v| match v {
                            Value::Null => rusqlite::types::Value::Null,
                            Value::Int(i) => rusqlite::types::Value::Integer(*i),
                            Value::Real(r) => rusqlite::types::Value::Real(*r),
                            Value::Text(s) => rusqlite::types::Value::Text(s.clone()),
                        })
                        .collect();
                    stmt.execute(rusqlite::params_from_iter(params))?;
                }
            }
            tx.commit()?;
        }
        conn.pragma_update(None, "query_only", true)?;
        Ok(SqlStore {
            conn,
            table: schema.table_name.clone(),
        })
    }

    pub fn table_name(&self) -> &str {
        &self.table
    }

    pub fn execute(&self, sql: &str) -> Result<ResultTable, SqlError> {
        let sql = sql.trim().trim_end_matches(';').trim();
        if sql.is_empty() {
            return Err(SqlError::new("empty query"));
        }
        let mut stmt = self.conn.prepare(sql)?;
        if !stmt.readonly() {
            return Err(SqlError::new("only read-only queries are allowed"));
        }
        let columns: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
        let n = columns.len();
        let mut rows = Vec::new();
        let mut cursor = stmt.query([])?;
        while let Some(row) = cursor.next()? {
            let cells = (0..n)
                .map(|i| {
                    Ok(match row.get_ref(i)? {
                        ValueRef::Null => Value::Null,
                        ValueRef::Integer(i) => Value::Int(i),
                        ValueRef::Real(r) => Value::Real(r),
                        ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
                        ValueRef::Blob(b) => Value::Text(String::from_utf8_lossy(b).into_owned()),
                    })
                })
                .collect::<Result<Vec<_>, rusqlite::Error>>()?;
            rows.push(cells);
        }
        Ok(ResultTable { columns, rows })
    }
}

/// One-off execution against a fresh store.
pub fn execute_sql(sql: &str, dataset: &Dataset) -> Result<ResultTable, SqlError> {
    SqlStore::open(dataset)?.execute(sql)
}

// ---------------------------------------------------------------------------
// Canonical results

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CanonicalCell {
    Null,
    Number(String),
    Text(String),
}

impl CanonicalCell {
    fn as_text(&self) -> &str {
        match self {
            CanonicalCell::Null => "",
            CanonicalCell::Number(s) | CanonicalCell::Text(s) => s,
        }
    }
}

/// Number rendered at nine significant digits, so values within ~1e-9
/// relative of each other share one spelling.
pub fn canonical_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("scientific literal parses");
    if rounded == 0.0 {
        "0".into()
    } else {
        rounded.to_string()
    }
}

/// Order-insensitive, normalization-insensitive form of a result table.
/// Column names are not part of it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanonicalResult {
    pub rows: Vec<Vec<CanonicalCell>>,
}

impl CanonicalResult {
    /// Cells joined by spaces, rows by newlines.
    pub fn render_text(&self) -> String {
        self.rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(CanonicalCell::as_text)
                    .filter(|s| !s.is_empty())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub fn canonicalize_result(table: &ResultTable) -> CanonicalResult {
    let mut rows: Vec<Vec<CanonicalCell>> = table
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|v| match v {
                    Value::Null => CanonicalCell::Null,
                    Value::Int(i) => CanonicalCell::Number(canonical_number(*i as f64)),
                    Value::Real(x) => CanonicalCell::Number(canonical_number(*x)),
                    Value::Text(s) => CanonicalCell::Text(normalize_text(s)),
                })
                .collect()
        })
        .collect();
    rows.sort();
    CanonicalResult { rows }
}

// ---------------------------------------------------------------------------
// Voting

/// Groups `keys` into equivalence classes (in order of first occurrence) and
/// returns the index of the first member of the largest class; ties go to
/// the class that appeared first.
pub fn elect<K: PartialEq>(keys: &[K]) -> Option<(usize, Vec<Vec<usize>>)> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        match groups.iter_mut().find(|g| keys[g[0]] == *k) {
            Some(g) => g.push(i),
            None => groups.push(vec![i]),
        }
    }
    let best = groups
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.len().cmp(&b.len()).then(ib.cmp(ia)))?
        .0;
    Some((groups[best][0], groups))
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum VoteKey {
    Result(CanonicalResult),
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoteGroup {
    pub members: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoteTally {
    pub winner: usize,
    pub groups: Vec<VoteGroup>,
}

pub fn majority_vote(
    candidates: &[String],
    store: &SqlStore,
) -> Result<(String, VoteTally), SqlAgentError> {
    let outcomes: Vec<Result<CanonicalResult, SqlError>> = candidates
        .iter()
        .map(|sql| store.execute(sql).map(|t| canonicalize_result(&t)))
        .collect();
    let keys: Vec<VoteKey> = outcomes
        .iter()
        .map(|o| match o {
            Ok(c) => VoteKey::Result(c.clone()),
            Err(_) => VoteKey::Error,
        })
        .collect();
    let (winner, groups) = elect(&keys).ok_or(SqlAgentError::EmptySlate)?;
    let groups = groups
        .into_iter()
        .map(|members| {
            let (result, error) = match &outcomes[members[0]] {
                Ok(c) => (Some(c.render_text()), None),
                Err(e) => (None, Some(e.message.clone())),
            };
            VoteGroup {
                members,
                result,
                error,
            }
        })
        .collect();
    Ok((candidates[winner].clone(), VoteTally { winner, groups }))
}

/// SQL text from a model reply: the fenced block if there is one, otherwise
/// the trimmed reply.
pub fn sql_from_completion(reply: &str) -> String {
    extract_code_block(reply).unwrap_or_else(|_| reply.trim().to_string())
}

#[derive(Debug, Clone, Serialize)]
pub struct BrowseOutcome {
    pub question: String,
    pub candidates: Vec<String>,
    pub sql: String,
    pub tally: VoteTally,
    pub result: ResultTable,
    pub canonical: CanonicalResult,
}

#[derive(Debug, Clone, Copy)]
pub struct BrowseConfig {
    pub k: usize,
    pub seed: u64,
}

impl Default for BrowseConfig {
    fn default() -> Self {
        BrowseConfig { k: 4, seed: 0 }
    }
}

/// Sample `k` candidates with seeds `seed, seed+1, ...`, vote, and execute
/// the winner.
pub fn answer_browsing(
    question: &str,
    store: &SqlStore,
    schema: &TableSchema,
    shots: &[Shot],
    config: BrowseConfig,
    provider: &dyn CompletionProvider,
) -> Result<BrowseOutcome, SqlAgentError> {
    let prompt = build_prompt(schema, question, shots)?.render();
    let candidates = (0..config.k as u64)
        .map(|i| {
            let req = CompletionRequest::new(
                RoleTag::SqlGenerator,
                SQL_SYSTEM_PROMPT,
                prompt.clone(),
                config.seed + i,
            );
            llm::complete(provider, &req).map(|r| sql_from_completion(&r))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (sql, tally) = majority_vote(&candidates, store)?;
    let result = store.execute(&sql)?;
    let canonical = canonicalize_result(&result);
    Ok(BrowseOutcome {
        question: question.to_string(),
        candidates,
        sql,
        tally,
        result,
        canonical,
    })
}

// ---------------------------------------------------------------------------
// Questions file

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrowseQuestion {
    pub id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_sql: Option<String>,
}

pub fn parse_browse_questions(text: &str) -> Result<Vec<BrowseQuestion>, SqlAgentError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| SqlAgentError::Questions(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn load_browse_questions(path: impl AsRef<Path>) -> Result<Vec<BrowseQuestion>, SqlAgentError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| SqlAgentError::Questions(format!("{}: {e}", path.as_ref().display())))?;
    parse_browse_questions(&text)
}

/// The ten bundled browsing questions with hand-annotated SQL over the
/// catastici fixture table.
pub fn bundled_browse_questions() -> Vec<BrowseQuestion> {
    parse_browse_questions(include_str!("../data/browse_questions.jsonl"))
        .expect("bundled questions parse")
}
