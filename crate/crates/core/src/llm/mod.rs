//! Access to chat-completion and embedding providers.
//!
//! [`Gateway`] wraps any [`LlmProvider`] with request validation, retries with
//! exponential backoff for transient failures, and a content-addressed response
//! cache (in memory, optionally mirrored to disk). Providers shipped here are an
//! OpenAI-compatible HTTP client and a deterministic offline mock.

pub mod mock;
pub mod openai;
pub mod prompts;
pub mod structured;
pub mod template;

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use url::Url;

pub use mock::MockProvider;
pub use openai::OpenAiProvider;
pub use prompts::PromptKind;
pub use structured::{parse_structured, parse_structured_lenient, FieldSpec, StructuredError};
pub use template::{PromptTemplate, TemplateError};

pub const DEFAULT_CHAT_MODEL: &str = "gpt-4o-mini";
pub const DEFAULT_EMBEDDING_MODEL: &str = "text-embedding-3-large";
pub const DEFAULT_EMBEDDING_DIM: usize = 100;
pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited by provider")]
    RateLimited,
    #[error("authentication failed")]
    AuthFailure,
    #[error("request timed out")]
    Timeout,
    #[error("embedding dimension {requested} not supported (provider returned {available})")]
    DimensionUnsupported { requested: usize, available: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("provider returned status {status}: {message}")]
    Api { status: u16, message: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

impl GatewayError {
    /// Whether retrying the same request may succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            GatewayError::Transport(_) | GatewayError::RateLimited | GatewayError::Timeout => true,
            GatewayError::Api { status, .. } => *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_id: String,
}

impl ChatRequest {
    /// Request with temperature 0 and the default token budget.
    pub fn new(
        system_prompt: impl Into<String>,
        user_prompt: impl Into<String>,
        model_id: impl Into<String>,
    ) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            user_prompt: user_prompt.into(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            model_id: model_id.into(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.system_prompt.trim().is_empty() || self.user_prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest(
                "prompts must be non-empty".into(),
            ));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest(
                "temperature must be >= 0".into(),
            ));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest(
                "max_tokens must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Same request with `suffix` appended to the user prompt.
    pub fn with_suffix(&self, suffix: &str) -> Self {
        let mut next = self.clone();
        next.user_prompt.push_str(suffix);
        next
    }

    fn cache_key(&self) -> String {
        content_hash(&serde_json::json!({
            "kind": "chat",
            "model": self.model_id,
            "system": self.system_prompt,
            "user": self.user_prompt,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRequest {
    pub text: String,
    pub dimension: usize,
    pub model_id: String,
}

impl EmbeddingRequest {
    pub fn new(text: impl Into<String>, dimension: usize) -> Self {
        Self {
            text: text.into(),
            dimension,
            model_id: DEFAULT_EMBEDDING_MODEL.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest(
                "embedding text must be non-empty".into(),
            ));
        }
        if self.dimension == 0 {
            return Err(GatewayError::InvalidRequest(
                "embedding dimension must be >= 1".into(),
            ));
        }
        Ok(())
    }

    fn cache_key(&self) -> String {
        content_hash(&serde_json::json!({
            "kind": "embed",
            "model": self.model_id,
            "text": self.text,
            "dimension": self.dimension,
        }))
    }
}

/// An API key that never shows up in `Debug` output.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

#[derive(Debug, Clone)]
pub struct ProviderConfig {
    pub base_url: Url,
    pub api_key: ApiKey,
    pub timeout: Duration,
    pub retry_count: u32,
    pub cache_dir: Option<PathBuf>,
}

impl ProviderConfig {
    pub const DEFAULT_BASE_URL: &'static str = "https://api.openai.com/v1";

    pub fn new(base_url: Url, api_key: ApiKey) -> Self {
        Self {
            base_url,
            api_key,
            timeout: Duration::from_secs(120),
            retry_count: 3,
            cache_dir: None,
        }
    }

    /// Read `LLM_API_KEY` (required) and `LLM_BASE_URL` (optional).
    pub fn from_env() -> Result<Self, GatewayError> {
        let key = std::env::var("LLM_API_KEY")
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or(GatewayError::AuthFailure)?;
        let base =
            std::env::var("LLM_BASE_URL").unwrap_or_else(|_| Self::DEFAULT_BASE_URL.to_string());
        let url = Url::parse(&base)
            .map_err(|e| GatewayError::InvalidRequest(format!("LLM_BASE_URL: {e}")))?;
        Ok(Self::new(url, ApiKey::new(key)))
    }
}

/// A chat/embedding backend.
pub trait LlmProvider: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError>;
    fn embed(&self, request: &EmbeddingRequest) -> Result<Vec<f64>, GatewayError>;
}

impl<P: LlmProvider + ?Sized> LlmProvider for Arc<P> {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        (**self).chat(request)
    }

    fn embed(&self, request: &EmbeddingRequest) -> Result<Vec<f64>, GatewayError> {
        (**self).embed(request)
    }
}

pub fn content_hash(value: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CachedValue {
    Text(String),
    Vector(Vec<f64>),
}

#[derive(Debug, Default)]
struct ResponseCache {
    memory: Mutex<HashMap<String, CachedValue>>,
    dir: Option<PathBuf>,
}

impl ResponseCache {
    fn get(&self, key: &str) -> Option<CachedValue> {
        if let Some(v) = self.memory.lock().unwrap().get(key) {
            return Some(v.clone());
        }
        let path = self.dir.as_ref()?.join(format!("{key}.json"));
        let text = std::fs::read_to_string(path).ok()?;
        let v: CachedValue = serde_json::from_str(&text).ok()?;
        self.memory
            .lock()
            .unwrap()
            .insert(key.to_string(), v.clone());
        Some(v)
    }

    fn put(&self, key: &str, value: CachedValue) {
        if let Some(dir) = &self.dir {
            // A failed disk write only costs a future cache miss.
            if std::fs::create_dir_all(dir).is_ok() {
                let tmp = dir.join(format!("{key}.tmp"));
                let body = serde_json::to_string(&value).expect("cache value serializes");
                if std::fs::write(&tmp, body).is_ok() {
                    let _ = std::fs::rename(&tmp, dir.join(format!("{key}.json")));
                }
            }
        }
        self.memory.lock().unwrap().insert(key.to_string(), value);
    }
}

/// Counters observable by callers and tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct GatewayStats {
    /// Calls that reached the provider, retries included.
    pub provider_calls: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

#[derive(Debug, Default)]
struct Counters {
    provider_calls: AtomicU64,
    cache_hits: AtomicU64,
    cache_misses: AtomicU64,
}

/// One prompt/response pair, kept for audit trails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt: String,
    pub response: String,
}

/// Failure of [`Gateway::complete_parsed`].
#[derive(Debug, Clone)]
pub enum ParseAttemptError<E> {
    Gateway(GatewayError),
    /// Both the original and the corrective attempt failed to parse.
    Parse {
        error: E,
        exchanges: Vec<Exchange>,
    },
}

pub struct Gateway {
    provider: Arc<dyn LlmProvider>,
    cache: Option<ResponseCache>,
    retry_count: u32,
    backoff_base: Duration,
    counters: Counters,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("cache", &self.cache.is_some())
            .field("retry_count", &self.retry_count)
            .finish()
    }
}

impl Gateway {
    /// Gateway without caching and with three retries.
    pub fn new(provider: Arc<dyn LlmProvider>) -> Self {
        Self {
            provider,
            cache: None,
            retry_count: 3,
            backoff_base: Duration::from_millis(250),
            counters: Counters::default(),
        }
    }

    /// Gateway configured from a [`ProviderConfig`]: retries and optional disk cache.
    pub fn from_config(provider: Arc<dyn LlmProvider>, config: &ProviderConfig) -> Self {
        let gw = Self::new(provider).with_retry(config.retry_count, Duration::from_millis(250));
        match &config.cache_dir {
            Some(dir) => gw.with_disk_cache(dir),
            None => gw.with_memory_cache(),
        }
    }

    pub fn with_memory_cache(mut self) -> Self {
        self.cache = Some(ResponseCache::default());
        self
    }

    pub fn with_disk_cache(mut self, dir: impl AsRef<Path>) -> Self {
        self.cache = Some(ResponseCache {
            memory: Mutex::default(),
            dir: Some(dir.as_ref().to_path_buf()),
        });
        self
    }

    pub fn with_retry(mut self, retry_count: u32, backoff_base: Duration) -> Self {
        self.retry_count = retry_count;
        self.backoff_base = backoff_base;
        self
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            provider_calls: self.counters.provider_calls.load(Ordering::Relaxed),
            cache_hits: self.counters.cache_hits.load(Ordering::Relaxed),
            cache_misses: self.counters.cache_misses.load(Ordering::Relaxed),
        }
    }

    fn with_retries<T>(
        &self,
        mut call: impl FnMut() -> Result<T, GatewayError>,
    ) -> Result<T, GatewayError> {
        let mut attempt = 0u32;
        loop {
            self.counters.provider_calls.fetch_add(1, Ordering::Relaxed);
            match call() {
                Ok(v) => return Ok(v),
                Err(e) if e.is_transient() && attempt < self.retry_count => {
                    let delay = self.backoff_base.saturating_mul(1u32 << attempt.min(16));
                    log::warn!(
                        "transient provider error ({e}); retry {} in {:?}",
                        attempt + 1,
                        delay
                    );
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn cached<T>(
        &self,
        key: String,
        unwrap: impl Fn(CachedValue) -> Option<T>,
        wrap: impl Fn(&T) -> CachedValue,
        fetch: impl FnMut() -> Result<T, GatewayError>,
    ) -> Result<T, GatewayError> {
        let Some(cache) = &self.cache else {
            return self.with_retries(fetch);
        };
        if let Some(v) = cache.get(&key).and_then(unwrap) {
            self.counters.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(v);
        }
        self.counters.cache_misses.fetch_add(1, Ordering::Relaxed);
        let v = self.with_retries(fetch)?;
        cache.put(&key, wrap(&v));
        Ok(v)
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        request.validate()?;
        self.cached(
            request.cache_key(),
            |v| match v {
                CachedValue::Text(t) => Some(t),
                CachedValue::Vector(_) => None,
            },
            |t| CachedValue::Text(t.clone()),
            || self.provider.chat(request),
        )
    }

    /// Embed `request.text`; the result always has `request.dimension` entries.
    pub fn embed(&self, request: &EmbeddingRequest) -> Result<Vec<f64>, GatewayError> {
        request.validate()?;
        let v = self.cached(
            request.cache_key(),
            |v| match v {
                CachedValue::Vector(x) => Some(x),
                CachedValue::Text(_) => None,
            },
            |x| CachedValue::Vector(x.clone()),
            || self.provider.embed(request),
        )?;
        if v.len() != request.dimension {
            return Err(GatewayError::DimensionUnsupported {
                requested: request.dimension,
                available: v.len(),
            });
        }
        Ok(v)
    }

    /// Complete and parse; on a parse failure ask once more with `suffix`
    /// appended before giving up.
    pub fn complete_parsed<T, E>(
        &self,
        request: &ChatRequest,
        suffix: &str,
        parse: impl Fn(&str) -> Result<T, E>,
    ) -> Result<(T, Vec<Exchange>), ParseAttemptError<E>> {
        let mut exchanges = Vec::with_capacity(2);
        let first = self.complete(request).map_err(ParseAttemptError::Gateway)?;
        exchanges.push(Exchange {
            prompt: request.user_prompt.clone(),
            response: first.clone(),
        });
        if let Ok(v) = parse(&first) {
            return Ok((v, exchanges));
        }
        let retry = request.with_suffix(suffix);
        let second = self.complete(&retry).map_err(ParseAttemptError::Gateway)?;
        exchanges.push(Exchange {
            prompt: retry.user_prompt.clone(),
            response: second.clone(),
        });
        match parse(&second) {
            Ok(v) => Ok((v, exchanges)),
            Err(error) => Err(ParseAttemptError::Parse { error, exchanges }),
        }
    }
}
