//! Config file plus command-line overrides. Flags always win over the file;
//! relative paths in the file resolve against the file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use cadastre_core::entity_search::SearchConfig;
use clap::Args;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) | CliError::Output { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_model: Option<String>,
    #[serde(default = "default_request_timeout")]
    pub request_timeout_s: f64,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}

fn default_request_timeout() -> f64 {
    120.0
}

/// On-disk shape. Every field is optional so flags can fill the gaps.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema: Option<PathBuf>,
    dataset_dir: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
    max_retries: Option<u32>,
    k: Option<usize>,
    shots: Option<usize>,
    fuzzy_threshold: Option<f64>,
    semantic_threshold: Option<f64>,
    top_k: Option<usize>,
    timeout_s: Option<f64>,
    mock_transcript: Option<PathBuf>,
    sandbox_command: Option<String>,
    judge: Option<bool>,
    provider: Option<ProviderConfig>,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory the schema's data files resolve against
    #[arg(long, global = true)]
    pub dataset_dir: Option<PathBuf>,
    /// Schema config (TOML) describing the datasets
    #[arg(long, global = true)]
    pub schema: Option<PathBuf>,
    /// Completion model name, overrides the config's provider model
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Comma-separated seeds; single-run commands use the first
    #[arg(long, alias = "seed", global = true, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long, global = true)]
    pub retries: Option<u32>,
    /// Few-shot examples for the SQL agent (0 or 3)
    #[arg(long, global = true)]
    pub shots: Option<usize>,
    /// SQL candidates sampled per question
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub fuzzy_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub semantic_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub top_k: Option<usize>,
    /// Sandbox timeout in seconds
    #[arg(long, global = true)]
    pub timeout: Option<f64>,
    /// Replay completions and executions from this transcript (offline)
    #[arg(long, global = true)]
    pub mock_transcript: Option<PathBuf>,
    /// Also write the structured report here
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print the structured report on stdout instead of the table
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub schema: Option<PathBuf>,
    pub dataset_dir: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub max_retries: u32,
    pub k: usize,
    pub shots: usize,
    pub search: SearchConfig,
    pub timeout_s: f64,
    pub mock_transcript: Option<PathBuf>,
    pub sandbox_command: Option<String>,
    pub judge: bool,
    pub provider: Option<ProviderConfig>,
    pub model: Option<String>,
    pub out: Option<PathBuf>,
    pub json: bool,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            schema: None,
            dataset_dir: None,
            seeds: vec![1, 2, 3],
            max_retries: 3,
            k: 4,
            shots: 0,
            search: SearchConfig::default(),
            timeout_s: 60.0,
            mock_transcript: None,
            sandbox_command: None,
            judge: true,
            provider: None,
            model: None,
            out: None,
            json: false,
        }
    }
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl AppConfig {
    pub fn load(args: &CommonArgs) -> Result<Self, CliError> {
        let mut cfg = AppConfig::default();
        if let Some(path) = &args.config {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let file: ConfigFile = toml::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.apply_file(file, base);
        }
        cfg.apply_flags(args);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, f: ConfigFile, base: &Path) {
        self.schema = f.schema.map(|p| resolve(base, p)).or(self.schema.take());
        self.dataset_dir = f.dataset_dir.map(|p| resolve(base, p)).or(self.dataset_dir.take());
        self.mock_transcript = f
            .mock_transcript
            .map(|p| resolve(base, p))
            .or(self.mock_transcript.take());
        if let Some(v) = f.seeds {
            self.seeds = v;
        }
        if let Some(v) = f.max_retries {
            self.max_retries = v;
        }
        if let Some(v) = f.k {
            self.k = v;
        }
        if let Some(v) = f.shots {
            self.shots = v;
        }
        if let Some(v) = f.fuzzy_threshold {
            self.search.fuzzy_threshold = v;
        }
        if let Some(v) = f.semantic_threshold {
            self.search.semantic_threshold = v;
        }
        if let Some(v) = f.top_k {
            self.search.top_k = v;
        }
        if let Some(v) = f.timeout_s {
            self.timeout_s = v;
        }
        if let Some(v) = f.judge {
            self.judge = v;
        }
        self.sandbox_command = f.sandbox_command.or(self.sandbox_command.take());
        self.provider = f.provider.or(self.provider.take());
    }

    fn apply_flags(&mut self, a: &CommonArgs) {
        macro_rules! take {
            ($flag:expr => $field:expr) => {
                if let Some(v) = $flag.clone() {
                    $field = v;
                }
            };
        }
        take!(a.seeds => self.seeds);
        take!(a.retries => self.max_retries);
        take!(a.k => self.k);
        take!(a.shots => self.shots);
        take!(a.fuzzy_threshold => self.search.fuzzy_threshold);
        take!(a.semantic_threshold => self.search.semantic_threshold);
        take!(a.top_k => self.search.top_k);
        take!(a.timeout => self.timeout_s);
        if a.schema.is_some() {
            self.schema = a.schema.clone();
        }
        if a.dataset_dir.is_some() {
            self.dataset_dir = a.dataset_dir.clone();
        }
        if a.mock_transcript.is_some() {
            self.mock_transcript = a.mock_transcript.clone();
        }
        if a.model.is_some() {
            self.model = a.model.clone();
        }
        self.out = a.out.clone();
        self.json = a.json;
    }

    fn validate(&self) -> Result<(), CliError> {
        for (what, path) in [
            ("schema file", &self.schema),
            ("mock transcript", &self.mock_transcript),
        ] {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(CliError::config(format!("{what} {} does not exist", p.display())));
                }
            }
        }
        if let Some(d) = &self.dataset_dir {
            if !d.is_dir() {
                return Err(CliError::config(format!("dataset directory {} does not exist", d.display())));
            }
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("at least one seed is required"));
        }
        if !matches!(self.shots, 0 | 3) {
            return Err(CliError::config(format!("--shots must be 0 or 3, got {}", self.shots)));
        }
        if self.k == 0 {
            return Err(CliError::config("--k must be at least 1"));
        }
        for (name, t) in [
            ("fuzzy", self.search.fuzzy_threshold),
            ("semantic", self.search.semantic_threshold),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return Err(CliError::config(format!("{name} threshold {t} is outside [0, 1]")));
            }
        }
        if self.timeout_s.is_nan() || self.timeout_s <= 0.0 {
            return Err(CliError::config("--timeout must be positive"));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seeds[0]
    }

    /// Provider settings with the `--model` override applied.
    pub fn provider(&self) -> Option<ProviderConfig> {
        self.provider.clone().map(|mut p| {
            if let Some(m) = &self.model {
                p.model = m.clone();
            }
            p
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn flags_override_file_and_paths_resolve() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "schema.toml", "datasets = []\n");
        let cfg_path = write(
            dir.path(),
            "app.toml",
            "schema = \"schema.toml\"\nseeds = [4, 5, 6]\nk = 8\n\n[provider]\nbase_url = \"http://x\"\nmodel = \"m1\"\n",
        );
        let args = CommonArgs {
            config: Some(cfg_path),
            k: Some(2),
            model: Some("m2".into()),
            ..Default::default()
        };
        let cfg = AppConfig::load(&args).unwrap();
        assert_eq!(cfg.schema.as_deref(), Some(dir.path().join("schema.toml").as_path()));
        assert_eq!(cfg.seeds, [4, 5, 6]);
        assert_eq!(cfg.k, 2);
        let p = cfg.provider().unwrap();
        assert_eq!(p.model, "m2");
        assert_eq!(p.api_key_env, "OPENAI_API_KEY");
    }

    #[test]
    fn rejects_missing_files_and_bad_values() {
        let missing = CommonArgs {
            schema: Some("/nonexistent/schema.toml".into()),
            ..Default::default()
        };
        assert!(matches!(AppConfig::load(&missing), Err(CliError::Config(_))));
        let shots = CommonArgs {
            shots: Some(2),
            ..Default::default()
        };
        assert_eq!(AppConfig::load(&shots).unwrap_err().exit_code(), 2);
        let dir = tempfile::tempdir().unwrap();
        let unknown = write(dir.path(), "app.toml", "sedes = [1]\n");
        let args = CommonArgs {
            config: Some(unknown),
            ..Default::default()
        };
        assert!(AppConfig::load(&args).is_err());
    }
}
