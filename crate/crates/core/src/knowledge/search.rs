//! Web search clients: a SERP-style HTTP client, a deterministic mock and a
//! JSONL replay source.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("search transport: {0}")]
    Transport(String),
    #[error("search quota exceeded")]
    QuotaExceeded,
    #[error("search authentication failed")]
    AuthFailure,
    #[error("malformed search response: {0}")]
    Malformed(String),
    #[error("SEARCH_API_KEY is not set")]
    MissingKey,
    #[error("snapshot: {0}")]
    Snapshot(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub title: String,
    pub url: Url,
    pub snippet: String,
    /// 1-based position on the provider's result page.
    pub source_rank: u32,
    pub retrieved_at: DateTime<Utc>,
    /// Query that produced this result.
    pub keyword: String,
}

pub trait SearchProvider: Send + Sync {
    /// Up to `n` results for `query`, in provider rank order.
    fn search(&self, query: &str, n: usize) -> Result<Vec<SearchResult>, SearchError>;
}

/// Enforces a minimum interval between consecutive requests across threads.
#[derive(Debug)]
pub struct RateLimiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(interval: Duration) -> Self {
        Self {
            interval,
            next: Mutex::new(None),
        }
    }

    pub fn wait(&self) {
        let sleep_for = {
            let mut next = self.next.lock().expect("rate limiter lock");
            let now = Instant::now();
            let slot = next.map_or(now, |t| t.max(now));
            *next = Some(slot + self.interval);
            slot - now
        };
        if !sleep_for.is_zero() {
            std::thread::sleep(sleep_for);
        }
    }
}

/// Client for SERP-style APIs: `GET endpoint?q=..&num=..&api_key=..` answering
/// `{"organic_results": [{"position", "title", "link", "snippet"}]}`.
pub struct SerpApiClient {
    endpoint: Url,
    api_key: String,
    agent: ureq::Agent,
    limiter: RateLimiter,
}

impl std::fmt::Debug for SerpApiClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SerpApiClient")
            .field("endpoint", &self.endpoint.as_str())
            .finish()
    }
}

#[derive(Deserialize)]
struct SerpResponse {
    #[serde(default)]
    organic_results: Vec<SerpItem>,
    #[serde(default)]
    error: Option<String>,
}

#[derive(Deserialize)]
struct SerpItem {
    position: Option<u32>,
    #[serde(default)]
    title: String,
    link: Option<String>,
    #[serde(default)]
    snippet: String,
}

impl SerpApiClient {
    pub const DEFAULT_ENDPOINT: &'static str = "https://serpapi.com/search.json";

    pub fn new(
        endpoint: Url,
        api_key: impl Into<String>,
        timeout: Duration,
        min_interval: Duration,
    ) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self {
            endpoint,
            api_key: api_key.into(),
            agent,
            limiter: RateLimiter::new(min_interval),
        }
    }

    /// Key from `SEARCH_API_KEY`; endpoint from `SEARCH_BASE_URL` if set.
    pub fn from_env() -> Result<Self, SearchError> {
        Self::from_env_with(Duration::from_secs(30), Duration::from_millis(200))
    }

    pub fn from_env_with(timeout: Duration, min_interval: Duration) -> Result<Self, SearchError> {
        let key = std::env::var("SEARCH_API_KEY").map_err(|_| SearchError::MissingKey)?;
        let endpoint =
            std::env::var("SEARCH_BASE_URL").unwrap_or_else(|_| Self::DEFAULT_ENDPOINT.to_string());
        let endpoint = Url::parse(&endpoint).map_err(|e| SearchError::Transport(e.to_string()))?;
        Ok(Self::new(endpoint, key, timeout, min_interval))
    }
}

/// Convert provider items to results; items without a parseable link are skipped.
fn to_results(items: Vec<SerpItem>, query: &str, n: usize, at: DateTime<Utc>) -> Vec<SearchResult> {
    let mut out: Vec<SearchResult> = items
        .into_iter()
        .enumerate()
        .filter_map(|(i, item)| {
            let url = Url::parse(item.link.as_deref()?).ok()?;
            Some(SearchResult {
                title: item.title,
                url,
                snippet: item.snippet,
                source_rank: item.position.unwrap_or(i as u32 + 1),
                retrieved_at: at,
                keyword: query.to_string(),
            })
        })
        .collect();
    out.sort_by_key(|r| r.source_rank);
    out.dedup_by_key(|r| r.source_rank);
    out.truncate(n);
    out
}

impl SearchProvider for SerpApiClient {
    fn search(&self, query: &str, n: usize) -> Result<Vec<SearchResult>, SearchError> {
        self.limiter.wait();
        let mut response = self
            .agent
            .get(self.endpoint.as_str())
            .query("engine", "google")
            .query("q", query)
            .query("num", n.to_string())
            .query("api_key", &self.api_key)
            .call()
            .map_err(|e| SearchError::Transport(e.to_string()))?;
        match response.status().as_u16() {
            200 => {}
            401 | 403 => return Err(SearchError::AuthFailure),
            429 => return Err(SearchError::QuotaExceeded),
            s => return Err(SearchError::Transport(format!("HTTP {s}"))),
        }
        let body: SerpResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| SearchError::Malformed(e.to_string()))?;
        if let Some(err) = body.error {
            if err.to_lowercase().contains("run out of searches") {
                return Err(SearchError::QuotaExceeded);
            }
            if body.organic_results.is_empty() {
                return Err(SearchError::Malformed(err));
            }
        }
        Ok(to_results(body.organic_results, query, n, Utc::now()))
    }
}

/// Timestamp stamped on every mock result.
pub fn mock_timestamp() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0)
        .single()
        .expect("valid date")
}

/// Offline search. Canned queries answer their canned pages; any other query
/// gets a deterministic synthetic page of `default_page_size` results.
#[derive(Debug, Clone, Default)]
pub struct MockSearch {
    canned: HashMap<String, Vec<(String, String, String)>>,
    default_page_size: usize,
}

impl MockSearch {
    pub fn new(default_page_size: usize) -> Self {
        Self {
            canned: HashMap::new(),
            default_page_size,
        }
    }

    /// Register `(title, url, snippet)` triples for `query`, in rank order.
    pub fn with_page(mut self, query: &str, page: Vec<(String, String, String)>) -> Self {
        self.canned.insert(query.to_string(), page);
        self
    }

    fn synthetic(&self, query: &str) -> Vec<(String, String, String)> {
        let slug: String = query
            .to_lowercase()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
            .collect();
        (1..=self.default_page_size)
            .map(|i| {
                (
                    format!("{query}: market report {i}"),
                    format!("https://research.example.com/{slug}/{i}"),
                    format!(
                        "The {query} segment was valued at ${}.{} billion with a CAGR of {}.{}% (source {i}).",
                        i + 1,
                        query.len() % 10,
                        5 + i,
                        i % 10
                    ),
                )
            })
            .collect()
    }
}

impl SearchProvider for MockSearch {
    fn search(&self, query: &str, n: usize) -> Result<Vec<SearchResult>, SearchError> {
        let page = self
            .canned
            .get(query)
            .cloned()
            .unwrap_or_else(|| self.synthetic(query));
        let items = page
            .into_iter()
            .enumerate()
            .map(|(i, (title, link, snippet))| SerpItem {
                position: Some(i as u32 + 1),
                title,
                link: Some(link),
                snippet,
            })
            .collect();
        Ok(to_results(items, query, n, mock_timestamp()))
    }
}

/// Replays results recorded with [`write_snapshot`], keyed by query.
#[derive(Debug, Clone, Default)]
pub struct ReplaySearch {
    by_query: HashMap<String, Vec<SearchResult>>,
}

impl ReplaySearch {
    pub fn load(path: &Path) -> Result<Self, SearchError> {
        let file = std::fs::File::open(path).map_err(|e| SearchError::Snapshot(e.to_string()))?;
        let mut by_query: HashMap<String, Vec<SearchResult>> = HashMap::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| SearchError::Snapshot(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: SearchResult = serde_json::from_str(&line)
                .map_err(|e| SearchError::Snapshot(format!("line {}: {e}", i + 1)))?;
            by_query.entry(r.keyword.clone()).or_default().push(r);
        }
        for v in by_query.values_mut() {
            v.sort_by_key(|r| r.source_rank);
        }
        Ok(Self { by_query })
    }
}

impl SearchProvider for ReplaySearch {
    fn search(&self, query: &str, n: usize) -> Result<Vec<SearchResult>, SearchError> {
        Ok(self
            .by_query
            .get(query)
            .map(|v| v.iter().take(n).cloned().collect())
            .unwrap_or_default())
    }
}

/// Append results as JSON lines.
pub fn write_snapshot<W: Write>(results: &[SearchResult], mut out: W) -> std::io::Result<()> {
    for r in results {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
