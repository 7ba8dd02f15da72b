use std::path::{Path, PathBuf};
use std::sync::Arc;

use partgrasp::grasp::GraspConfig;
use partgrasp::perception::{ChatBackend, InferenceConfig, ScriptedBackend};
use serde::{Deserialize, Serialize};

use crate::http_backend::HttpBackend;

/// Environment variable that overrides the `backend` key.
pub const BACKEND_ENV: &str = "PARTGRASP_BACKEND";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Mock,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mock" => Ok(Self::Mock),
            "http" => Ok(Self::Http),
            other => Err(ConfigError::Invalid(format!("unknown backend `{other}` (expected mock or http)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockSettings {
    pub script: PathBuf,
}

impl Default for MockSettings {
    fn default() -> Self {
        Self {
            script: PathBuf::from("crates/core/fixtures/mock_dialogues.json"),
        }
    }
}

/// OpenAI-compatible chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpSettings {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: u64,
    /// Attach the scene image to requests.
    pub vision: bool,
}

impl Default for HttpSettings {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            api_key_env: "PARTGRASP_API_KEY".into(),
            timeout_secs: 60,
            vision: true,
        }
    }
}

/// Per-session pipeline parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub inference: InferenceConfig,
    pub grasp: GraspConfig<f64>,
    /// Structuring-element half size in pixels; scaled default when absent.
    pub element_half: Option<usize>,
    /// Grasps kept per step result.
    pub top_n: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inference: InferenceConfig::default(),
            grasp: GraspConfig::with_seed(0),
            element_half: None,
            top_n: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub backend: BackendKind,
    pub mock: MockSettings,
    pub http: HttpSettings,
    pub pipeline: PipelineConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Mock,
            mock: MockSettings::default(),
            http: HttpSettings::default(),
            pipeline: PipelineConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Backend(#[from] partgrasp::IoError),
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path` (defaults when `None`), then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = get(BACKEND_ENV) {
            self.backend = v.parse()?;
        }
        Ok(())
    }

    pub fn build_backend(&self) -> Result<Arc<dyn ChatBackend>, ConfigError> {
        Ok(match self.backend {
            BackendKind::Mock => Arc::new(ScriptedBackend::load(&self.mock.script)?),
            BackendKind::Http => {
                let key = std::env::var(&self.http.api_key_env).ok();
                Arc::new(HttpBackend::new(self.http.clone(), key).map_err(|e| ConfigError::Invalid(e.to_string()))?)
            }
        })
    }
}
