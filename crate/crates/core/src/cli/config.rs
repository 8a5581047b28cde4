//! `ssff.json`: every tunable in one file. Command-line flags override it.
//! Secrets are never read from here, only from the environment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::analyst::PipelineConfig;
use crate::eval::EvalConfig;
use crate::fit::TrainConfig;
use crate::knowledge::search::{MockSearch, SearchProvider, SerpApiClient};
use crate::llm::{Gateway, MockProvider, OpenAiProvider, PromptKind, ProviderConfig};
use crate::rf::ForestConfig;

pub const DEFAULT_CONFIG_FILE: &str = "ssff.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmSettings {
    pub timeout_secs: u64,
    pub retry_count: u32,
    /// On-disk response cache; memory-only when unset.
    pub cache_dir: Option<PathBuf>,
}

impl Default for LlmSettings {
    fn default() -> Self {
        Self {
            timeout_secs: 120,
            retry_count: 3,
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSettings {
    pub timeout_secs: u64,
    pub min_interval_ms: u64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            timeout_secs: 30,
            min_interval_ms: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockSettings {
    pub enabled: bool,
    pub seed: u64,
    /// Fixed answers keyed by prompt kind name, e.g. `"integration"`.
    pub overrides: BTreeMap<String, String>,
    /// Results per mock search page.
    pub search_page_size: usize,
}

impl Default for MockSettings {
    fn default() -> Self {
        Self {
            enabled: false,
            seed: 0,
            overrides: BTreeMap::new(),
            search_page_size: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub llm: LlmSettings,
    pub search: SearchSettings,
    pub pipeline: PipelineConfig,
    pub forest: ForestConfig,
    pub mlp: TrainConfig,
    pub eval: EvalConfig,
    pub out_dir: PathBuf,
    pub mock: MockSettings,
    pub rf_model: Option<PathBuf>,
    pub fit_model: Option<PathBuf>,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            llm: LlmSettings::default(),
            search: SearchSettings::default(),
            pipeline: PipelineConfig::default(),
            forest: ForestConfig::default(),
            mlp: TrainConfig::default(),
            eval: EvalConfig::default(),
            out_dir: PathBuf::from("runs"),
            mock: MockSettings::default(),
            rf_model: None,
            fit_model: None,
        }
    }
}

impl AppConfig {
    /// Load `path`, or `ssff.json` in the working directory when it exists,
    /// or defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let path = match path {
            Some(p) => p.to_path_buf(),
            None if Path::new(DEFAULT_CONFIG_FILE).exists() => PathBuf::from(DEFAULT_CONFIG_FILE),
            None => return Ok(Self::default()),
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }

    pub fn gateway(&self) -> Result<Gateway, CliError> {
        if self.mock.enabled {
            let mut mock = MockProvider::new(self.mock.seed);
            for (name, answer) in &self.mock.overrides {
                let kind = PromptKind::from_name(name).ok_or_else(|| {
                    CliError::Validation(format!("unknown prompt kind `{name}` in mock overrides"))
                })?;
                mock = mock.with_override(kind, answer.clone());
            }
            return Ok(Gateway::new(Arc::new(mock)).with_memory_cache());
        }
        let mut pc = ProviderConfig::from_env().map_err(|e| {
            CliError::Validation(format!("LLM provider: {e}; set LLM_API_KEY or use --mock"))
        })?;
        pc.timeout = Duration::from_secs(self.llm.timeout_secs);
        pc.retry_count = self.llm.retry_count;
        pc.cache_dir = self.llm.cache_dir.clone();
        Ok(Gateway::from_config(
            Arc::new(OpenAiProvider::new(pc.clone())),
            &pc,
        ))
    }

    /// The search backend, or `None` when search is disabled or unconfigured.
    pub fn search(&self) -> Option<Box<dyn SearchProvider>> {
        if !self.pipeline.knowledge.enabled {
            return None;
        }
        if self.mock.enabled {
            return Some(Box::new(MockSearch::new(self.mock.search_page_size)));
        }
        match SerpApiClient::from_env_with(
            Duration::from_secs(self.search.timeout_secs),
            Duration::from_millis(self.search.min_interval_ms),
        ) {
            Ok(c) => Some(Box::new(c)),
            Err(e) => {
                log::warn!("web search unavailable ({e}); running without external knowledge");
                None
            }
        }
    }
}
