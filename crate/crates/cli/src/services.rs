//! Datasets and external services for a command: live HTTP backends and the
//! sandbox runner, or a replay of a recorded transcript.

use std::path::PathBuf;
use std::time::Duration;

use cadastre_core::llm::{
    CachedEmbedder, ClusterMockEmbedder, CompletionProvider, Embedder, OpenAiCompatible,
    OpenAiEmbedder, ScriptedProvider, Transcript,
};
use cadastre_core::python_agent::{Executor, ReplayExecutor, SandboxClient};
use cadastre_core::tabular::{Dataset, DatasetNumber, SchemaConfig};

use crate::config::{AppConfig, CliError};

pub struct Services {
    pub provider: Box<dyn CompletionProvider>,
    pub embedder: Box<dyn Embedder>,
    pub executor: Option<Box<dyn Executor>>,
}

impl Services {
    /// `need_executor` is false for commands that never run generated code.
    pub fn build(cfg: &AppConfig, need_executor: bool) -> Result<Self, CliError> {
        if let Some(path) = &cfg.mock_transcript {
            let transcript = Transcript::load(path)
                .map_err(|e| CliError::config(format!("transcript {}: {e}", path.display())))?;
            log::info!("replaying {} transcript records from {}", transcript.len(), path.display());
            return Ok(Services {
                provider: Box::new(ScriptedProvider::from_transcript(&transcript)),
                embedder: Box::new(ClusterMockEmbedder::default()),
                executor: Some(Box::new(ReplayExecutor::from_transcript(&transcript))),
            });
        }

        let p = cfg.provider().ok_or_else(|| {
            CliError::config("no [provider] section in the config and no --mock-transcript given")
        })?;
        let key = std::env::var(&p.api_key_env).ok();
        if key.is_none() {
            log::warn!("{} is not set; calling the endpoint without a key", p.api_key_env);
        }
        let timeout = Duration::from_secs_f64(p.request_timeout_s);
        let embedder: Box<dyn Embedder> = match &p.embedding_model {
            Some(m) => Box::new(CachedEmbedder::new(OpenAiEmbedder::new(
                &p.base_url,
                m,
                key.clone(),
                timeout,
            ))),
            None => {
                log::warn!("no embedding_model configured; semantic search uses the built-in cluster embedder");
                Box::new(ClusterMockEmbedder::default())
            }
        };
        let executor: Option<Box<dyn Executor>> = match (&cfg.sandbox_command, need_executor) {
            (Some(cmd), _) => Some(Box::new(
                SandboxClient::from_command_line(cmd)
                    .ok_or_else(|| CliError::config("sandbox_command is empty"))?,
            )),
            (None, true) => {
                return Err(CliError::config(
                    "sandbox_command must be set to run generated programs",
                ))
            }
            (None, false) => None,
        };
        Ok(Services {
            provider: Box::new(OpenAiCompatible::new(&p.base_url, &p.model, key, timeout)),
            embedder,
            executor,
        })
    }
}

pub fn load_datasets(cfg: &AppConfig) -> Result<Vec<Dataset>, CliError> {
    let schema_path = cfg
        .schema
        .as_ref()
        .ok_or_else(|| CliError::config("--schema is required"))?;
    let schema = SchemaConfig::load(schema_path)
        .map_err(|e| CliError::config(format!("{}: {e}", schema_path.display())))?;
    let dir: PathBuf = match &cfg.dataset_dir {
        Some(d) => d.clone(),
        None => schema_path.parent().map(PathBuf::from).unwrap_or_default(),
    };
    for d in &schema.datasets {
        if let Some(f) = &d.file {
            let path = dir.join(f);
            if !path.is_file() {
                return Err(CliError::config(format!(
                    "data file {} of dataset {} does not exist",
                    path.display(),
                    d.number
                )));
            }
        }
    }
    let datasets = schema
        .load_all(&dir)
        .map_err(|e| CliError::config(format!("loading datasets: {e}")))?;
    if datasets.is_empty() {
        return Err(CliError::config(format!(
            "{} names no data files",
            schema_path.display()
        )));
    }
    Ok(datasets)
}

/// Browsing questions run against dataset 1 of the schema.
pub fn browse_dataset(cfg: &AppConfig) -> Result<Dataset, CliError> {
    load_datasets(cfg)?
        .into_iter()
        .find(|d| d.number() == DatasetNumber::FIRST)
        .ok_or_else(|| CliError::config("the schema has no dataset 1 for the SQL agent"))
}
