//! Three-tier search for question phrases inside a column's vocabulary:
//! exact (normalized equality), then fuzzy (edit-distance similarity), then
//! semantic (embedding cosine). The first tier that yields anything wins.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{cosine_similarity, Embedder, LlmError};
use crate::tabular::{normalize_text, Dataset, DatasetNumber, TabularError, Value, ValueKind};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error("embedder failure: {0}")]
    Embedder(#[from] LlmError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchTier {
    Exact,
    Fuzzy,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredValue {
    pub value: String,
    pub score: f64,
}

impl ScoredValue {
    fn new(value: impl Into<String>, score: f64) -> Self {
        ScoredValue {
            value: value.into(),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMatch {
    pub phrase: String,
    pub dataset_number: DatasetNumber,
    pub column: String,
    pub matches: Vec<ScoredValue>,
    pub tier: MatchTier,
}

impl EntityMatch {
    pub fn values(&self) -> impl Iterator<Item = &str> {
        self.matches.iter().map(|m| m.value.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub fuzzy_threshold: f64,
    pub semantic_threshold: f64,
    #[serde(rename = "semantic_top_k")]
    pub top_k: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            fuzzy_threshold: 0.70,
            semantic_threshold: 0.40,
            top_k: 5,
        }
    }
}

/// Normalized, deduplicated, sorted distinct values of a text column.
pub fn distinct_vocabulary(dataset: &Dataset, column: &str) -> Result<Vec<String>, SearchError> {
    let meta = dataset
        .schema()
        .column(column)
        .ok_or_else(|| TabularError::UnknownColumn(column.to_string()))?;
    if meta.kind != ValueKind::Text {
        return Err(TabularError::NotTextual(column.to_string()).into());
    }
    let vocab: BTreeSet<String> = dataset
        .column_values(column)?
        .filter_map(Value::as_text)
        .map(normalize_text)
        .filter(|s| !s.is_empty())
        .collect();
    Ok(vocab.into_iter().collect())
}

/// Levenshtein distance over Unicode scalar values, unit costs.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - d / max(|a|, |b|)` on already-normalized strings.
pub fn similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - edit_distance(a, b) as f64 / longest as f64
}

fn sort_scored(v: &mut [ScoredValue]) {
    v.sort_by(|x, y| match y.score.total_cmp(&x.score) {
        Ordering::Equal => x.value.cmp(&y.value),
        o => o,
    });
}

/// Vocabulary entries equal to the phrase after normalization.
pub fn exact_match(phrase: &str, vocabulary: &[String]) -> Vec<ScoredValue> {
    let needle = normalize_text(phrase);
    vocabulary
        .iter()
        .filter(|v| normalize_text(v) == needle)
        .map(|v| ScoredValue::new(v.clone(), 1.0))
        .collect()
}

pub fn fuzzy_match(phrase: &str, vocabulary: &[String], threshold: f64) -> Vec<ScoredValue> {
    let phrase = normalize_text(phrase);
    let mut out: Vec<ScoredValue> = vocabulary
        .iter()
        .filter_map(|v| {
            let s = similarity(&phrase, &normalize_text(v));
            (s >= threshold).then(|| ScoredValue::new(v.clone(), s))
        })
        .collect();
    sort_scored(&mut out);
    out
}

pub fn semantic_match(
    phrase: &str,
    vocabulary: &[String],
    embedder: &dyn Embedder,
    threshold: f64,
    top_k: usize,
) -> Result<Vec<ScoredValue>, SearchError> {
    assert!(top_k >= 1, "top_k must be at least 1");
    if vocabulary.is_empty() {
        return Ok(Vec::new());
    }
    let query = embedder.embed(&[normalize_text(phrase)])?;
    let values = embedder.embed(vocabulary)?;
    let mut out: Vec<ScoredValue> = vocabulary
        .iter()
        .zip(&values)
        .filter_map(|(v, emb)| {
            let s = cosine_similarity(&query[0], emb).clamp(0.0, 1.0);
            (s >= threshold).then(|| ScoredValue::new(v.clone(), s))
        })
        .collect();
    sort_scored(&mut out);
    out.truncate(top_k);
    Ok(out)
}

/// Tiered lookup of `phrase` in `column`. The embedder is only consulted when
/// both the exact and the fuzzy tier come back empty.
pub fn search_entity(
    phrase: &str,
    dataset: &Dataset,
    column: &str,
    config: &SearchConfig,
    embedder: &dyn Embedder,
) -> Result<EntityMatch, SearchError> {
    let vocab = distinct_vocabulary(dataset, column)?;
    search_in_vocabulary(phrase, &vocab, config, embedder).map(|(tier, matches)| EntityMatch {
        phrase: phrase.to_string(),
        dataset_number: dataset.number(),
        column: column.to_string(),
        matches,
        tier,
    })
}

pub fn search_in_vocabulary(
    phrase: &str,
    vocabulary: &[String],
    config: &SearchConfig,
    embedder: &dyn Embedder,
) -> Result<(MatchTier, Vec<ScoredValue>), SearchError> {
    let exact = exact_match(phrase, vocabulary);
    if !exact.is_empty() {
        return Ok((MatchTier::Exact, exact));
    }
    let fuzzy = fuzzy_match(phrase, vocabulary, config.fuzzy_threshold);
    if !fuzzy.is_empty() {
        return Ok((MatchTier::Fuzzy, fuzzy));
    }
    let semantic = semantic_match(
        phrase,
        vocabulary,
        embedder,
        config.semantic_threshold,
        config.top_k,
    )?;
    Ok((MatchTier::Semantic, semantic))
}
