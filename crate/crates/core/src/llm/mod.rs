//! Completion and embedding backends, transcripts, and the strict output
//! grammars agent prompts ask for.
//!
//! Every agent goes through [`complete`], which validates the request and
//! retries exactly once on a transport timeout. Malformed content is never
//! retried here; callers decide what a bad answer means for them.

mod http;
pub(crate) mod mock;
mod parse;
mod transcript;

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{OpenAiCompatible, OpenAiEmbedder};
pub use mock::{CachedEmbedder, ClusterMockEmbedder, RecordingProvider, ScriptedProvider};
pub use parse::{
    extract_code_block, format_reference_list, parse_boolean_verdict, parse_bracketed_answer,
    parse_reference_list, ParseError,
};
pub use transcript::{CompletionRecord, ExecutionRecord, Transcript, TranscriptRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("provider timed out: {0}")]
    Timeout(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// Which pipeline stage issued a completion call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleTag {
    ColumnExtractor,
    RowExtractor,
    Planner,
    Coder,
    Debugger,
    SqlGenerator,
    Judge,
}

impl RoleTag {
    pub const ALL: [RoleTag; 7] = [
        RoleTag::ColumnExtractor,
        RoleTag::RowExtractor,
        RoleTag::Planner,
        RoleTag::Coder,
        RoleTag::Debugger,
        RoleTag::SqlGenerator,
        RoleTag::Judge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoleTag::ColumnExtractor => "column_extractor",
            RoleTag::RowExtractor => "row_extractor",
            RoleTag::Planner => "planner",
            RoleTag::Coder => "coder",
            RoleTag::Debugger => "debugger",
            RoleTag::SqlGenerator => "sql_generator",
            RoleTag::Judge => "judge",
        }
    }
}

impl fmt::Display for RoleTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub role_tag: RoleTag,
    pub system_prompt: String,
    pub user_prompt: String,
    pub seed: u64,
}

impl CompletionRequest {
    pub fn new(
        role_tag: RoleTag,
        system_prompt: impl Into<String>,
        user_prompt: impl Into<String>,
        seed: u64,
    ) -> Self {
        CompletionRequest {
            role_tag,
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            seed,
        }
    }

    /// Hex SHA-256 prefix over both prompts; keys transcript replay.
    pub fn prompt_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.system_prompt.as_bytes());
        h.update([0u8]);
        h.update(self.user_prompt.as_bytes());
        hex_prefix(&h.finalize(), 16)
    }
}

pub(crate) fn hex_prefix(bytes: &[u8], n_chars: usize) -> String {
    bytes
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>()
        .chars()
        .take(n_chars)
        .collect()
}

pub(crate) fn content_hash(text: &str) -> String {
    hex_prefix(&Sha256::digest(text.as_bytes()), 16)
}

/// A text-completion backend. Implementations must be shareable across
/// concurrent runs.
pub trait CompletionProvider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError>;
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for &P {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl<P: CompletionProvider + ?Sized> CompletionProvider for std::sync::Arc<P> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

/// Validated completion with a single retry on transport timeout.
pub fn complete(
    provider: &dyn CompletionProvider,
    request: &CompletionRequest,
) -> Result<String, LlmError> {
    if request.system_prompt.trim().is_empty() || request.user_prompt.trim().is_empty() {
        return Err(LlmError::InvalidRequest("prompts must be non-empty".into()));
    }
    match provider.complete(request) {
        Err(LlmError::Timeout(msg)) => {
            log::warn!("{} timed out ({msg}); retrying once", request.role_tag);
            provider.complete(request)
        }
        other => other,
    }
}

pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    /// One fixed-dimension vector per input, in input order.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, LlmError>;
}

impl<E: Embedder + ?Sized> Embedder for &E {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, LlmError> {
        (**self).embed(texts)
    }
}

impl<E: Embedder + ?Sized> Embedder for std::sync::Arc<E> {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, LlmError> {
        (**self).embed(texts)
    }
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (*x as f64, *y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}
