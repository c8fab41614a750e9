//! Python bindings. Structured results cross the boundary as plain tuples,
//! lists and JSON strings; failures become `ValueError` subclasses.

use cadastre_core::consistency::{self, InfoScore};
use cadastre_core::entity_search;
use cadastre_core::llm::{self, ScriptedProvider};
use cadastre_core::python_agent::{Answer, AnswerFormat, RunRecord, RunStatus};
use cadastre_core::sql_agent::{self, BrowseConfig, SqlStore};
use cadastre_core::tabular::{self, FixtureProfile};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(cadastre, ParseError, PyValueError);
create_exception!(cadastre, SqlError, PyValueError);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_err(e: llm::ParseError) -> PyErr {
    ParseError::new_err(e.to_string())
}

#[pyfunction]
fn normalize_text(text: &str) -> String {
    tabular::normalize_text(text)
}

#[pyfunction]
fn edit_distance(a: &str, b: &str) -> usize {
    entity_search::edit_distance(a, b)
}

#[pyfunction]
fn similarity(a: &str, b: &str) -> f64 {
    entity_search::similarity(&tabular::normalize_text(a), &tabular::normalize_text(b))
}

/// `(value, score)` pairs, best first.
#[pyfunction]
#[pyo3(signature = (phrase, vocabulary, threshold = 0.70))]
fn fuzzy_match(phrase: &str, vocabulary: Vec<String>, threshold: f64) -> Vec<(String, f64)> {
    entity_search::fuzzy_match(phrase, &vocabulary, threshold)
        .into_iter()
        .map(|m| (m.value, m.score))
        .collect()
}

/// Tiered search with the built-in cluster embedder. Returns the tier name
/// and the matches.
#[pyfunction]
#[pyo3(signature = (phrase, vocabulary, fuzzy_threshold = 0.70, semantic_threshold = 0.40, top_k = 5))]
fn search(
    phrase: &str,
    vocabulary: Vec<String>,
    fuzzy_threshold: f64,
    semantic_threshold: f64,
    top_k: usize,
) -> PyResult<(String, Vec<(String, f64)>)> {
    let cfg = entity_search::SearchConfig {
        fuzzy_threshold,
        semantic_threshold,
        top_k: top_k.max(1),
    };
    let (tier, matches) =
        entity_search::search_in_vocabulary(phrase, &vocabulary, &cfg, &llm::ClusterMockEmbedder::default())
            .map_err(value_err)?;
    let tier = serde_json::to_value(tier).map_err(value_err)?;
    Ok((
        tier.as_str().unwrap_or_default().to_string(),
        matches.into_iter().map(|m| (m.value, m.score)).collect(),
    ))
}

#[pyfunction]
fn parse_bracketed_answer(text: &str) -> PyResult<String> {
    llm::parse_bracketed_answer(text).map_err(parse_err)
}

#[pyfunction]
fn parse_boolean_verdict(text: &str) -> PyResult<bool> {
    llm::parse_boolean_verdict(text).map_err(parse_err)
}

/// `(phrase, column, dataset_number)` tuples.
#[pyfunction]
fn parse_reference_list(text: &str) -> PyResult<Vec<(String, String, u8)>> {
    Ok(llm::parse_reference_list(text)
        .map_err(parse_err)?
        .into_iter()
        .map(|r| (r.phrase, r.column, r.dataset_number.get()))
        .collect())
}

#[pyfunction]
fn extract_code_block(text: &str) -> PyResult<String> {
    llm::extract_code_block(text).map_err(parse_err)
}

#[pyfunction]
fn unigram_overlap(predicted: &str, ground_truth: &str) -> PyResult<f64> {
    consistency::unigram_overlap(predicted, ground_truth).map_err(value_err)
}

fn run_record(answer: Option<&str>, score: Option<u64>, format: AnswerFormat) -> PyResult<RunRecord> {
    let answer = answer.map(|a| Answer::parse(a, format)).transpose().map_err(value_err)?;
    Ok(RunRecord {
        question_id: String::new(),
        seed: 0,
        status: if answer.is_some() {
            RunStatus::Answered
        } else {
            RunStatus::Unanswerable
        },
        answer,
        program: None,
        attempts_used: 0,
        info_score: score.map(|s| InfoScore::new(s, s.max(1))),
        references: Vec::new(),
        entities: Vec::new(),
        plan: None,
        error: None,
    })
}

/// EC level and consistency class of three runs. `None` marks an
/// unanswered run or a missing information score.
#[pyfunction]
#[pyo3(signature = (answers, scores, answer_type = "entity"))]
fn classify(
    answers: [Option<String>; 3],
    scores: [Option<u64>; 3],
    answer_type: &str,
) -> PyResult<(String, String)> {
    let format: AnswerFormat = answer_type.parse().map_err(PyValueError::new_err)?;
    let runs = [
        run_record(answers[0].as_deref(), scores[0], format)?,
        run_record(answers[1].as_deref(), scores[1], format)?,
        run_record(answers[2].as_deref(), scores[2], format)?,
    ];
    Ok((
        consistency::classify_execution_consistency(&runs).to_string(),
        consistency::classify_consistency(&runs).to_string(),
    ))
}

/// A loaded table. Build one with `generate_fixture` or `Dataset.from_csv`.
#[pyclass(frozen)]
struct Dataset {
    inner: tabular::Dataset,
}

#[pymethods]
impl Dataset {
    /// Parses CSV text against one of the built-in fixture schemas.
    #[staticmethod]
    fn from_csv(text: &str, profile: &str) -> PyResult<Self> {
        let profile: FixtureProfile = profile.parse().map_err(PyValueError::new_err)?;
        let inner = tabular::parse_dataset(text, &profile.schema(), profile.default_number(), profile.display_name())
            .map_err(value_err)?;
        Ok(Dataset { inner })
    }

    #[getter]
    fn row_count(&self) -> usize {
        self.inner.row_count()
    }

    #[getter]
    fn columns(&self) -> Vec<String> {
        self.inner.schema().columns.iter().map(|c| c.name.clone()).collect()
    }

    #[getter]
    fn table_name(&self) -> String {
        self.inner.schema().table_name.clone()
    }

    fn to_csv(&self) -> PyResult<String> {
        self.inner.to_csv_string().map_err(value_err)
    }

    fn vocabulary(&self, column: &str) -> PyResult<Vec<String>> {
        entity_search::distinct_vocabulary(&self.inner, column).map_err(value_err)
    }

    /// Canonical result rows of a read-only query, as strings.
    fn query(&self, sql: &str) -> PyResult<Vec<Vec<String>>> {
        let table = sql_agent::execute_sql(sql, &self.inner).map_err(|e| SqlError::new_err(e.to_string()))?;
        canonical_rows(&table)
    }

    /// Elects one of the candidate queries by execution result. Returns
    /// the winning index and the groups of agreeing candidates.
    fn majority_vote(&self, candidates: Vec<String>) -> PyResult<(usize, Vec<Vec<usize>>)> {
        let store = SqlStore::open(&self.inner).map_err(|e| SqlError::new_err(e.to_string()))?;
        let (_, tally) = sql_agent::majority_vote(&candidates, &store).map_err(value_err)?;
        Ok((tally.winner, tally.groups.into_iter().map(|g| g.members).collect()))
    }

    /// Scores the SQL agent on the bundled questions, with `queries`
    /// standing in for the model (one reply per candidate, in order).
    /// Returns the report as JSON.
    #[pyo3(signature = (queries, shots = 0, k = 4))]
    fn evaluate_browsing(&self, queries: Vec<String>, shots: usize, k: usize) -> PyResult<String> {
        let shots = match shots {
            0 => Vec::new(),
            3 => sql_agent::default_shots(),
            n => return Err(PyValueError::new_err(format!("shots must be 0 or 3, got {n}"))),
        };
        let provider = ScriptedProvider::new(queries);
        let report = consistency::evaluate_browsing_suite(
            &sql_agent::bundled_browse_questions(),
            &self.inner,
            &shots,
            BrowseConfig { k, seed: 0 },
            &provider,
        )
        .map_err(value_err)?;
        serde_json::to_string(&report).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.row_count()
    }

    fn __repr__(&self) -> String {
        format!("Dataset({:?}, {} rows)", self.inner.display_name(), self.inner.row_count())
    }
}

fn canonical_rows(table: &sql_agent::ResultTable) -> PyResult<Vec<Vec<String>>> {
    let canonical = sql_agent::canonicalize_result(table);
    let rows = serde_json::to_value(&canonical.rows).map_err(value_err)?;
    Ok(rows
        .as_array()
        .into_iter()
        .flatten()
        .map(|r| {
            r.as_array()
                .into_iter()
                .flatten()
                .map(|c| c.as_str().unwrap_or_default().to_string())
                .collect()
        })
        .collect())
}

/// Deterministic synthetic table: `catastici`, `sommarioni` or `landmarks`.
#[pyfunction]
#[pyo3(signature = (profile, seed = 1, rows = 200))]
fn generate_fixture(profile: &str, seed: u64, rows: usize) -> PyResult<Dataset> {
    let profile: FixtureProfile = profile.parse().map_err(PyValueError::new_err)?;
    if rows == 0 {
        return Err(PyValueError::new_err("rows must be positive"));
    }
    Ok(Dataset {
        inner: tabular::generate_fixture(seed, rows, profile),
    })
}

/// `[{"id", "question", "gt_sql"}]` of the bundled browsing questions, as JSON.
#[pyfunction]
fn bundled_browse_questions() -> PyResult<String> {
    serde_json::to_string(&sql_agent::bundled_browse_questions()).map_err(value_err)
}

#[pymodule]
fn cadastre(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ParseError", m.py().get_type::<ParseError>())?;
    m.add("SqlError", m.py().get_type::<SqlError>())?;
    m.add_class::<Dataset>()?;
    m.add_function(wrap_pyfunction!(normalize_text, m)?)?;
    m.add_function(wrap_pyfunction!(edit_distance, m)?)?;
    m.add_function(wrap_pyfunction!(similarity, m)?)?;
    m.add_function(wrap_pyfunction!(fuzzy_match, m)?)?;
    m.add_function(wrap_pyfunction!(search, m)?)?;
    m.add_function(wrap_pyfunction!(parse_bracketed_answer, m)?)?;
    m.add_function(wrap_pyfunction!(parse_boolean_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(parse_reference_list, m)?)?;
    m.add_function(wrap_pyfunction!(extract_code_block, m)?)?;
    m.add_function(wrap_pyfunction!(unigram_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(generate_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(bundled_browse_questions, m)?)?;
    Ok(())
}
