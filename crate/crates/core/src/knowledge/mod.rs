//! Retrieval-backed market research: keyword generation, web search, result
//! filtering and LLM synthesis.

pub mod search;

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::llm::prompts::SYSTEM_PROMPT;
use crate::llm::{ChatRequest, Exchange, Gateway, GatewayError, PromptKind};

pub use search::{
    MockSearch, RateLimiter, ReplaySearch, SearchError, SearchProvider, SearchResult, SerpApiClient,
};

pub const MAX_KEYWORDS: usize = 8;
pub const MAX_KEYWORD_WORDS: usize = 10;

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("description is empty")]
    EmptyDescription,
    #[error("no usable keywords in model answer")]
    EmptyKeywords,
    #[error("no search results to synthesize")]
    EmptyResults,
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Ordered, case-insensitively distinct search phrases (at most eight, each
/// at most ten words).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordSet(Vec<String>);

impl KeywordSet {
    /// Parse a comma- or line-separated list. Bullets, numbering and quotes are
    /// stripped, over-long phrases dropped, duplicates removed keeping the first.
    pub fn parse(text: &str) -> Result<Self, KnowledgeError> {
        static BULLET: OnceLock<Regex> = OnceLock::new();
        let bullet =
            BULLET.get_or_init(|| Regex::new(r"^\s*(?:[-*•]|\d+[.)])\s*").expect("bullet regex"));
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for raw in text.split([',', '\n', ';']) {
            let phrase = bullet.replace(raw, "");
            let phrase = phrase
                .trim()
                .trim_matches(|c: char| matches!(c, '"' | '\'' | '`' | '.'))
                .trim();
            let words = phrase.split_whitespace().count();
            if words == 0 || words > MAX_KEYWORD_WORDS {
                continue;
            }
            let phrase = phrase.split_whitespace().collect::<Vec<_>>().join(" ");
            if seen.insert(phrase.to_lowercase()) {
                out.push(phrase);
            }
            if out.len() == MAX_KEYWORDS {
                break;
            }
        }
        if out.is_empty() {
            return Err(KnowledgeError::EmptyKeywords);
        }
        Ok(Self(out))
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn joined(&self) -> String {
        self.0.join(", ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    /// One query per keyword.
    #[default]
    PerKeyword,
    /// A single query of all keywords joined by spaces.
    Joined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnowledgeConfig {
    pub enabled: bool,
    /// Results kept per query.
    pub n_results: usize,
    pub query_mode: QueryMode,
    /// Domains whose results are dropped (subdomains included).
    pub blocklist: Vec<String>,
}

impl Default for KnowledgeConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            n_results: 10,
            query_mode: QueryMode::PerKeyword,
            blocklist: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketResearchReport {
    pub text: String,
    /// Lines of the synthesis that carry figures (sizes, growth rates, shares).
    pub quantitative_points: Vec<String>,
    pub citations: Vec<Url>,
}

pub fn generate_keywords(
    description: &str,
    gateway: &Gateway,
    model_id: &str,
) -> Result<(KeywordSet, Exchange), KnowledgeError> {
    if description.trim().is_empty() {
        return Err(KnowledgeError::EmptyDescription);
    }
    let prompt = PromptKind::Keywords
        .template()
        .render_pairs(&[("description", description.trim())])
        .expect("keywords template binds description");
    let response = gateway.complete(&ChatRequest::new(SYSTEM_PROMPT, prompt.clone(), model_id))?;
    let keywords = KeywordSet::parse(&response)?;
    Ok((keywords, Exchange { prompt, response }))
}

/// Run the queries for `keywords` concurrently and concatenate the pages in
/// keyword order. Each page keeps at most `n_results` results in rank order.
pub fn search(
    provider: &dyn SearchProvider,
    keywords: &KeywordSet,
    n_results: usize,
    mode: QueryMode,
) -> Result<Vec<SearchResult>, SearchError> {
    let queries: Vec<String> = match mode {
        QueryMode::PerKeyword => keywords.as_slice().to_vec(),
        QueryMode::Joined => vec![keywords.as_slice().join(" ")],
    };
    let pages: Vec<Result<Vec<SearchResult>, SearchError>> = std::thread::scope(|s| {
        let handles: Vec<_> = queries
            .iter()
            .map(|q| s.spawn(move || provider.search(q, n_results)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("search thread"))
            .collect()
    });
    let mut out = Vec::new();
    for (q, page) in queries.iter().zip(pages) {
        let mut page = page?;
        page.truncate(n_results);
        for r in &mut page {
            r.keyword.clone_from(q);
        }
        out.extend(page);
    }
    Ok(out)
}

fn blocked(url: &Url, blocklist: &[String]) -> bool {
    let Some(host) = url.host_str() else {
        return false;
    };
    let host = host.to_ascii_lowercase();
    blocklist.iter().any(|d| {
        let d = d.trim().trim_start_matches('.').to_ascii_lowercase();
        !d.is_empty() && (host == d || host.ends_with(&format!(".{d}")))
    })
}

/// Drop empty snippets, blocklisted domains and repeated URLs. Of several
/// results sharing a URL the best-ranked one survives; order is otherwise kept.
pub fn filter_results(results: &[SearchResult], blocklist: &[String]) -> Vec<SearchResult> {
    let candidates: Vec<&SearchResult> = results
        .iter()
        .filter(|r| !r.snippet.trim().is_empty() && !blocked(&r.url, blocklist))
        .collect();
    let mut best: HashMap<&str, usize> = HashMap::new();
    for (i, r) in candidates.iter().enumerate() {
        best.entry(r.url.as_str())
            .and_modify(|j| {
                if r.source_rank < candidates[*j].source_rank {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    candidates
        .iter()
        .enumerate()
        .filter(|(i, r)| best[r.url.as_str()] == *i)
        .map(|(_, r)| (*r).clone())
        .collect()
}

/// Lines mentioning money, percentages or magnitudes.
fn quantitative_points(text: &str) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"(?i)(\$\s?\d|\d\s?%|\d[\d.,]*\s*(billion|million|trillion|bn|mn)\b|\bcagr\b)")
            .expect("quant regex")
    });
    text.lines()
        .map(str::trim)
        .filter(|l| re.is_match(l))
        .map(|l| l.trim_start_matches(['-', '*', ' ']).to_string())
        .collect()
}

fn render_results(results: &[SearchResult]) -> String {
    results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            format!(
                "[{}] {} ({})\n{}",
                i + 1,
                r.title.trim(),
                r.url,
                r.snippet.trim()
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub fn synthesize(
    results: &[SearchResult],
    startup_context: &str,
    gateway: &Gateway,
    model_id: &str,
) -> Result<(MarketResearchReport, Exchange), KnowledgeError> {
    if results.is_empty() {
        return Err(KnowledgeError::EmptyResults);
    }
    let prompt = PromptKind::Synthesis
        .template()
        .render_pairs(&[
            ("startup_context", startup_context.trim()),
            ("search_results", &render_results(results)),
        ])
        .expect("synthesis template binds its slots");
    let text = gateway.complete(&ChatRequest::new(SYSTEM_PROMPT, prompt.clone(), model_id))?;
    let mut seen = HashSet::new();
    let citations = results
        .iter()
        .filter(|r| seen.insert(r.url.as_str()))
        .map(|r| r.url.clone())
        .collect();
    let report = MarketResearchReport {
        quantitative_points: quantitative_points(&text),
        text: text.clone(),
        citations,
    };
    Ok((
        report,
        Exchange {
            prompt,
            response: text,
        },
    ))
}

/// Everything produced by one keyword → search → filter → synthesis pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Research {
    pub keywords: KeywordSet,
    pub results: Vec<SearchResult>,
    pub report: MarketResearchReport,
    pub exchanges: Vec<Exchange>,
}

pub fn research(
    description: &str,
    startup_context: &str,
    gateway: &Gateway,
    provider: &dyn SearchProvider,
    config: &KnowledgeConfig,
    model_id: &str,
) -> Result<Research, KnowledgeError> {
    let (keywords, kw_exchange) = generate_keywords(description, gateway, model_id)?;
    let raw = search(
        provider,
        &keywords,
        config.n_results.max(1),
        config.query_mode,
    )?;
    let results = filter_results(&raw, &config.blocklist);
    let (report, syn_exchange) = synthesize(&results, startup_context, gateway, model_id)?;
    Ok(Research {
        keywords,
        results,
        report,
        exchanges: vec![kw_exchange, syn_exchange],
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::search::mock_timestamp;
    use super::*;
    use crate::llm::MockProvider;

    fn result(url: &str, rank: u32, snippet: &str) -> SearchResult {
        SearchResult {
            title: format!("t{rank}"),
            url: Url::parse(url).unwrap(),
            snippet: snippet.into(),
            source_rank: rank,
            retrieved_at: mock_timestamp(),
            keyword: "k".into(),
        }
    }

    #[test]
    fn keyword_parsing() {
        let k = KeywordSet::parse("A, a, A").unwrap();
        assert_eq!(k.as_slice(), ["A"]);
        let k =
            KeywordSet::parse("Chinese Education Consulting Market, Growth, Trend, Size, Revenue.")
                .unwrap();
        assert_eq!(
            k.as_slice(),
            [
                "Chinese Education Consulting Market",
                "Growth",
                "Trend",
                "Size",
                "Revenue"
            ]
        );
        let k = KeywordSet::parse("1. \"alpha\"\n2. beta\n- gamma").unwrap();
        assert_eq!(k.as_slice(), ["alpha", "beta", "gamma"]);
        assert!(matches!(
            KeywordSet::parse("  \n, ,"),
            Err(KnowledgeError::EmptyKeywords)
        ));
        let many: Vec<String> = (0..12).map(|i| format!("k{i}")).collect();
        assert_eq!(
            KeywordSet::parse(&many.join(",")).unwrap().as_slice().len(),
            MAX_KEYWORDS
        );
        let long = "one two three four five six seven eight nine ten eleven, short";
        assert_eq!(KeywordSet::parse(long).unwrap().as_slice(), ["short"]);
    }

    #[test]
    fn keywords_from_mock() {
        let gw = Gateway::new(Arc::new(
            MockProvider::new(0).with_override(PromptKind::Keywords, ""),
        ));
        assert!(matches!(
            generate_keywords("EdTech", &gw, "m"),
            Err(KnowledgeError::EmptyKeywords)
        ));
        let gw = Gateway::new(Arc::new(MockProvider::new(0)));
        let (k, _) =
            generate_keywords("Consulting for students applying abroad", &gw, "m").unwrap();
        assert!(k.as_slice().len() >= 3);
    }

    #[test]
    fn search_tags_keywords_and_bounds_count() {
        let provider = MockSearch::new(6);
        let k = KeywordSet::parse("alpha, beta").unwrap();
        let r = search(&provider, &k, 3, QueryMode::PerKeyword).unwrap();
        assert_eq!(r.len(), 6);
        assert!(r[..3].iter().all(|x| x.keyword == "alpha"));
        assert!(r[3..].iter().all(|x| x.keyword == "beta"));
        let j = search(&provider, &k, 3, QueryMode::Joined).unwrap();
        assert_eq!(j.len(), 3);
        assert_eq!(j[0].keyword, "alpha beta");
    }

    #[test]
    fn filtering() {
        let dup = vec![
            result("https://a.com/x", 3, "s"),
            result("https://a.com/x", 1, "s2"),
        ];
        let f = filter_results(&dup, &[]);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].source_rank, 1);
        assert!(filter_results(&[result("https://a.com", 1, "  ")], &[]).is_empty());
        let clean = vec![
            result("https://a.com/1", 1, "x"),
            result("https://b.com/2", 2, "y"),
        ];
        assert_eq!(filter_results(&clean, &[]), clean);
        let blocked = filter_results(&clean, &["b.com".to_string()]);
        assert_eq!(blocked.len(), 1);
        let sub = filter_results(
            &[result("https://news.b.com/1", 1, "x")],
            &["b.com".to_string()],
        );
        assert!(sub.is_empty());
    }

    #[test]
    fn synthesis_cites_inputs() {
        let gw = Gateway::new(Arc::new(MockProvider::new(0)));
        let results = vec![
            result(
                "https://a.com/1",
                1,
                "China's $2.5 billion college application consulting market",
            ),
            result("https://b.com/2", 2, "grows 12% a year"),
        ];
        let (report, ex) = synthesize(&results, "EdTech startup", &gw, "m").unwrap();
        assert_eq!(report.citations.len(), 2);
        assert!(report.text.contains("$2.5 billion"));
        assert!(report
            .quantitative_points
            .iter()
            .any(|p| p.contains("$2.5 billion")));
        assert!(ex.prompt.contains("https://b.com/2"));
        assert!(matches!(
            synthesize(&[], "x", &gw, "m"),
            Err(KnowledgeError::EmptyResults)
        ));
    }

    #[test]
    fn full_chain_offline() {
        let gw = Gateway::new(Arc::new(MockProvider::new(3)));
        let r = research(
            "Consulting for students applying to universities abroad",
            "EdTech",
            &gw,
            &MockSearch::new(5),
            &KnowledgeConfig {
                n_results: 3,
                ..Default::default()
            },
            "m",
        )
        .unwrap();
        assert!(r.results.len() <= 3 * r.keywords.as_slice().len());
        let urls: HashSet<_> = r.results.iter().map(|x| x.url.clone()).collect();
        assert!(r.report.citations.iter().all(|c| urls.contains(c)));
    }

    proptest! {
        #[test]
        fn filter_is_idempotent(items in proptest::collection::vec((0u8..6, 1u32..8, "[a-z ]{0,5}"), 0..20)) {
            let results: Vec<SearchResult> = items
                .iter()
                .map(|(host, rank, snip)| result(&format!("https://h{}.com/p", host % 3), *rank, snip))
                .collect();
            let block = vec!["h2.com".to_string()];
            let once = filter_results(&results, &block);
            prop_assert_eq!(filter_results(&once, &block), once.clone());
        }
    }
}
