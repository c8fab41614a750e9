//! OpenAI-compatible HTTP backends (chat completions and embeddings).
//! Generation parameters are left at provider defaults; only the seed is
//! forwarded.

use std::time::Duration;

use serde_json::{json, Value as Json};

use super::{CompletionProvider, CompletionRequest, Embedder, LlmError};

fn transport_error(err: ureq::Error) -> LlmError {
    match err {
        ureq::Error::Status(code, resp) => {
            let body = resp.into_string().unwrap_or_default();
            LlmError::ProviderUnavailable(format!("HTTP {code}: {}", body.trim()))
        }
        ureq::Error::Transport(t) => {
            let timed_out = std::error::Error::source(&t)
                .and_then(|s| s.downcast_ref::<std::io::Error>())
                .is_some_and(|io| {
                    matches!(
                        io.kind(),
                        std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock
                    )
                });
            if timed_out {
                LlmError::Timeout(t.to_string())
            } else {
                LlmError::ProviderUnavailable(t.to_string())
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Endpoint {
    base_url: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl Endpoint {
    fn new(base_url: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        Endpoint {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }

    fn post(&self, path: &str, body: Json) -> Result<Json, LlmError> {
        let mut req = self.agent.post(&format!("{}/{path}", self.base_url));
        if let Some(key) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let resp = req.send_json(body).map_err(transport_error)?;
        resp.into_json()
            .map_err(|e| LlmError::ProviderUnavailable(format!("bad response body: {e}")))
    }
}

pub struct OpenAiCompatible {
    endpoint: Endpoint,
    id: String,
}

impl OpenAiCompatible {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        OpenAiCompatible {
            endpoint: Endpoint::new(base_url, model, api_key, timeout),
            id: format!("openai-compatible:{model}"),
        }
    }

    pub(crate) fn request_body(&self, request: &CompletionRequest) -> Json {
        json!({
            "model": self.endpoint.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "seed": request.seed,
        })
    }
}

impl CompletionProvider for OpenAiCompatible {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let body = self.endpoint.post("chat/completions", self.request_body(request))?;
        body.pointer("/choices/0/message/content")
            .and_then(Json::as_str)
            .map(str::to_string)
            .ok_or_else(|| LlmError::ProviderUnavailable("response has no message content".into()))
    }
}

pub struct OpenAiEmbedder {
    endpoint: Endpoint,
    id: String,
}

impl OpenAiEmbedder {
    pub fn new(base_url: &str, model: &str, api_key: Option<String>, timeout: Duration) -> Self {
        OpenAiEmbedder {
            endpoint: Endpoint::new(base_url, model, api_key, timeout),
            id: format!("openai-embeddings:{model}"),
        }
    }
}

impl Embedder for OpenAiEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, LlmError> {
        if texts.is_empty() {
            return Err(LlmError::InvalidRequest("nothing to embed".into()));
        }
        let body = self.endpoint.post(
            "embeddings",
            json!({"model": self.endpoint.model, "input": texts}),
        )?;
        let bad = || LlmError::ProviderUnavailable("malformed embeddings response".into());
        let data = body.get("data").and_then(Json::as_array).ok_or_else(bad)?;
        if data.len() != texts.len() {
            return Err(bad());
        }
        let mut out = vec![Vec::new(); texts.len()];
        for (pos, item) in data.iter().enumerate() {
            let index = item
                .get("index")
                .and_then(Json::as_u64)
                .map_or(pos, |i| i as usize);
            let vector = item
                .get("embedding")
                .and_then(Json::as_array)
                .ok_or_else(bad)?
                .iter()
                .map(|x| x.as_f64().map(|f| f as f32).ok_or_else(bad))
                .collect::<Result<Vec<f32>, _>>()?;
            *out.get_mut(index).ok_or_else(bad)? = vector;
        }
        Ok(out)
    }
}
