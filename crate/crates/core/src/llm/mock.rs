//! Offline providers: scripted/replayed completions, a recording wrapper, a
//! cluster-structured mock embedder and an embedding cache.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::Instant;

use sha2::{Digest, Sha256};

use super::transcript::{CompletionRecord, Transcript, TranscriptRecord};
use super::{CompletionProvider, CompletionRequest, Embedder, LlmError, RoleTag};
use crate::tabular::normalize_text;

/// FIFO queues under keys of decreasing specificity. `pop` takes from the
/// first non-empty queue among the candidate keys.
#[derive(Debug)]
pub(crate) struct KeyedQueues<K, V> {
    queues: Mutex<HashMap<K, VecDeque<V>>>,
}

impl<K: Eq + Hash, V> Default for KeyedQueues<K, V> {
    fn default() -> Self {
        KeyedQueues {
            queues: Mutex::new(HashMap::new()),
        }
    }
}

impl<K: Eq + Hash, V> KeyedQueues<K, V> {
    pub(crate) fn push(&self, key: K, value: V) {
        self.queues
            .lock()
            .unwrap()
            .entry(key)
            .or_default()
            .push_back(value);
    }

    pub(crate) fn pop(&self, candidates: impl IntoIterator<Item = K>) -> Option<V> {
        let mut queues = self.queues.lock().unwrap();
        candidates
            .into_iter()
            .find_map(|k| queues.get_mut(&k).and_then(VecDeque::pop_front))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.queues.lock().unwrap().values().map(VecDeque::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ScriptKey {
    role: Option<RoleTag>,
    seed: Option<u64>,
    prompt_hash: Option<String>,
}

/// Deterministic completion provider.
///
/// Responses are queued globally, per role, per (role, seed), or per
/// (role, seed, prompt hash); a request is served from the most specific
/// non-empty queue. An exhausted script reports `ProviderUnavailable`.
/// Every served call is appended to the provider's transcript.
#[derive(Debug)]
pub struct ScriptedProvider {
    id: String,
    script: KeyedQueues<ScriptKey, String>,
    transcript: Mutex<Transcript>,
}

impl Default for ScriptedProvider {
    fn default() -> Self {
        ScriptedProvider {
            id: "scripted".into(),
            script: KeyedQueues::default(),
            transcript: Mutex::new(Transcript::new()),
        }
    }
}

impl ScriptedProvider {
    /// Global FIFO: responses are served in order regardless of role.
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        let p = Self::default();
        for r in responses {
            p.enqueue(None, None, None, r.into());
        }
        p
    }

    pub fn with_role<S: Into<String>>(
        self,
        role: RoleTag,
        responses: impl IntoIterator<Item = S>,
    ) -> Self {
        for r in responses {
            self.enqueue(Some(role), None, None, r.into());
        }
        self
    }

    pub fn with_seeded<S: Into<String>>(
        self,
        role: RoleTag,
        seed: u64,
        responses: impl IntoIterator<Item = S>,
    ) -> Self {
        for r in responses {
            self.enqueue(Some(role), Some(seed), None, r.into());
        }
        self
    }

    /// Replay provider over the completion records of a transcript.
    pub fn from_transcript(transcript: &Transcript) -> Self {
        let p = ScriptedProvider {
            id: "replay".into(),
            ..Self::default()
        };
        for c in transcript.completions() {
            p.enqueue(Some(c.role_tag), Some(c.seed), c.prompt_hash.clone(), c.response.clone());
        }
        p
    }

    fn enqueue(
        &self,
        role: Option<RoleTag>,
        seed: Option<u64>,
        prompt_hash: Option<String>,
        response: String,
    ) {
        self.script.push(
            ScriptKey {
                role,
                seed,
                prompt_hash,
            },
            response,
        );
    }

    pub fn transcript(&self) -> Transcript {
        self.transcript.lock().unwrap().clone()
    }

    pub fn calls(&self) -> usize {
        self.transcript.lock().unwrap().len()
    }

    pub fn remaining(&self) -> usize {
        self.script.remaining()
    }
}

impl CompletionProvider for ScriptedProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let hash = request.prompt_hash();
        let role = Some(request.role_tag);
        let seed = Some(request.seed);
        let key = |r, s, h| ScriptKey {
            role: r,
            seed: s,
            prompt_hash: h,
        };
        let response = self
            .script
            .pop([
                key(role, seed, Some(hash.clone())),
                key(role, seed, None),
                key(role, None, None),
                key(None, None, None),
            ])
            .ok_or_else(|| {
                LlmError::ProviderUnavailable(format!(
                    "no scripted response for {} (seed {})",
                    request.role_tag, request.seed
                ))
            })?;
        self.transcript
            .lock()
            .unwrap()
            .push(TranscriptRecord::Completion(CompletionRecord {
                role_tag: request.role_tag,
                seed: request.seed,
                prompt_hash: Some(hash),
                response: response.clone(),
                latency_ms: 0,
                provider: self.id.clone(),
            }));
        Ok(response)
    }
}

/// Wraps a live provider and records every successful call.
pub struct RecordingProvider<P> {
    inner: P,
    transcript: Mutex<Transcript>,
}

impl<P: CompletionProvider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        RecordingProvider {
            inner,
            transcript: Mutex::new(Transcript::new()),
        }
    }

    pub fn transcript(&self) -> Transcript {
        self.transcript.lock().unwrap().clone()
    }
}

impl<P: CompletionProvider> CompletionProvider for RecordingProvider<P> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let start = Instant::now();
        let response = self.inner.complete(request)?;
        self.transcript
            .lock()
            .unwrap()
            .push(TranscriptRecord::Completion(CompletionRecord {
                role_tag: request.role_tag,
                seed: request.seed,
                prompt_hash: Some(request.prompt_hash()),
                response: response.clone(),
                latency_ms: start.elapsed().as_millis() as u64,
                provider: self.inner.id().to_string(),
            }));
        Ok(response)
    }
}

// ---------------------------------------------------------------------------
// Embeddings

const NOISE_DIMS: usize = 64;
const NOISE_WEIGHT: f32 = 0.3;

const DEFAULT_CLUSTERS: &[&[&str]] = &[
    &[
        "house", "houses", "home", "homes", "dwelling", "residence", "residential", "casa", "case",
        "casetta", "appartamento", "apartment", "apartments", "abitazione", "casa in soler",
        "altro appartamento",
    ],
    &[
        "shop", "shops", "workshop", "workshops", "store", "commercial", "bottega", "botteghe",
    ],
    &["warehouse", "storage", "garage", "magazzeno", "magazen"],
    &["blacksmith", "smith", "fabro", "baker", "pistor", "cheesemonger", "casarol"],
    &["lawyer", "lawyers", "attorney", "legal", "avvocato", "avocato"],
    &["procurator", "procurators", "magistrate", "procuratore"],
    &[
        "doctor", "doctors", "physician", "physicians", "medical", "medical doctor",
        "medical doctors", "medico", "medici",
    ],
    &["notary", "notaries", "nodaro"],
    &["merchant", "merchants", "trader", "mercante"],
    &["church", "churches", "chiesa", "parish church"],
    &["square", "squares", "campo", "campiello", "piazza", "plaza"],
    &["garden", "gardens", "orto", "yard", "corte", "courtyard"],
];

/// Embedder whose geometry is fixed by hand: every term of a cluster points
/// mostly along that cluster's axis, with a small term-specific offset.
/// Unknown single words get a pure noise direction; unknown multi-word
/// phrases average the vectors of their words.
#[derive(Debug)]
pub struct ClusterMockEmbedder {
    clusters: Vec<Vec<String>>,
    overrides: HashMap<String, Vec<f32>>,
    calls: AtomicUsize,
    failing: bool,
}

impl Default for ClusterMockEmbedder {
    fn default() -> Self {
        Self::new(DEFAULT_CLUSTERS.iter().map(|c| c.iter().map(|s| s.to_string()).collect()))
    }
}

impl ClusterMockEmbedder {
    pub fn new(clusters: impl IntoIterator<Item = Vec<String>>) -> Self {
        ClusterMockEmbedder {
            clusters: clusters
                .into_iter()
                .map(|c| c.iter().map(|t| normalize_text(t)).collect())
                .collect(),
            overrides: HashMap::new(),
            calls: AtomicUsize::new(0),
            failing: false,
        }
    }

    /// Pin the vector returned for `term` (must have [`Self::dim`] entries).
    pub fn with_vector(mut self, term: &str, vector: Vec<f32>) -> Self {
        assert_eq!(vector.len(), self.dim(), "override has wrong dimension");
        self.overrides.insert(normalize_text(term), vector);
        self
    }

    /// Every call fails with `ProviderUnavailable`.
    pub fn failing(mut self) -> Self {
        self.failing = true;
        self
    }

    pub fn dim(&self) -> usize {
        self.clusters.len() + NOISE_DIMS
    }

    /// Number of `embed` invocations so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn noise_axis(&self, term: &str) -> usize {
        let digest = Sha256::digest(term.as_bytes());
        self.clusters.len() + (digest[0] as usize % NOISE_DIMS)
    }

    fn cluster_of(&self, term: &str) -> Option<usize> {
        self.clusters.iter().position(|c| c.iter().any(|t| t == term))
    }

    fn known_vector(&self, term: &str) -> Option<Vec<f32>> {
        if let Some(v) = self.overrides.get(term) {
            return Some(v.clone());
        }
        let cluster = self.cluster_of(term)?;
        let mut v = vec![0.0; self.dim()];
        v[cluster] = 1.0;
        v[self.noise_axis(term)] += NOISE_WEIGHT;
        Some(v)
    }

    pub fn vector(&self, text: &str) -> Vec<f32> {
        let term = normalize_text(text);
        if let Some(v) = self.known_vector(&term) {
            return v;
        }
        let mut sum = vec![0.0; self.dim()];
        let mut known = 0;
        for word in term.split(' ') {
            if let Some(v) = self.known_vector(word) {
                known += 1;
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
            }
        }
        if known == 0 {
            sum[self.noise_axis(&term)] = 1.0;
        }
        sum
    }
}

impl Embedder for ClusterMockEmbedder {
    fn id(&self) -> &str {
        "cluster-mock"
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if self.failing {
            return Err(LlmError::ProviderUnavailable("mock embedder set to fail".into()));
        }
        if texts.is_empty() {
            return Err(LlmError::InvalidRequest("nothing to embed".into()));
        }
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

/// Memoizes embeddings per (provider id, text). Safe under concurrent use.
pub struct CachedEmbedder<E> {
    inner: E,
    cache: RwLock<HashMap<(String, String), Vec<f32>>>,
}

impl<E: Embedder> CachedEmbedder<E> {
    pub fn new(inner: E) -> Self {
        CachedEmbedder {
            inner,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn cached(&self) -> usize {
        self.cache.read().unwrap().len()
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, LlmError> {
        let id = self.inner.id().to_string();
        let key = |t: &String| (id.clone(), t.clone());
        let missing: Vec<String> = {
            let cache = self.cache.read().unwrap();
            let mut seen = std::collections::HashSet::new();
            texts
                .iter()
                .filter(|t| !cache.contains_key(&key(t)) && seen.insert(t.as_str()))
                .cloned()
                .collect()
        };
        if !missing.is_empty() {
            let vectors = self.inner.embed(&missing)?;
            let mut cache = self.cache.write().unwrap();
            for (t, v) in missing.iter().zip(vectors) {
                cache.insert(key(t), v);
            }
        }
        let cache = self.cache.read().unwrap();
        Ok(texts.iter().map(|t| cache[&key(t)].clone()).collect())
    }
}
