//! Deterministic offline provider.
//!
//! Every answer is a pure function of `(prompt, seed)`. Lookup order for chat:
//! exact canned responses keyed by prompt hash, per-template overrides, a custom
//! responder, and finally a scripted analyst that emits well-formed answers for
//! each pipeline template.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::prompts::PromptKind;
use super::{ChatRequest, EmbeddingRequest, GatewayError, LlmProvider};
use crate::rf::categories::Category;

pub type Responder = Arc<dyn Fn(&ChatRequest) -> String + Send + Sync>;

/// Hash used as the key for canned responses.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

fn seeded_rng(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

#[derive(Clone)]
pub struct MockProvider {
    seed: u64,
    canned: HashMap<String, String>,
    overrides: HashMap<PromptKind, String>,
    responder: Option<Responder>,
    chat_calls: Arc<AtomicU64>,
    embed_calls: Arc<AtomicU64>,
}

impl std::fmt::Debug for MockProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockProvider")
            .field("seed", &self.seed)
            .field("canned", &self.canned.len())
            .field("overrides", &self.overrides.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            canned: HashMap::new(),
            overrides: HashMap::new(),
            responder: None,
            chat_calls: Arc::default(),
            embed_calls: Arc::default(),
        }
    }

    /// Answer `response` whenever the user prompt is exactly `prompt`.
    pub fn with_canned(mut self, prompt: &str, response: impl Into<String>) -> Self {
        self.canned.insert(prompt_hash(prompt), response.into());
        self
    }

    /// Answer `response` to every prompt rendered from the `kind` template.
    pub fn with_override(mut self, kind: PromptKind, response: impl Into<String>) -> Self {
        self.overrides.insert(kind, response.into());
        self
    }

    pub fn with_responder(
        mut self,
        f: impl Fn(&ChatRequest) -> String + Send + Sync + 'static,
    ) -> Self {
        self.responder = Some(Arc::new(f));
        self
    }

    pub fn chat_calls(&self) -> u64 {
        self.chat_calls.load(Ordering::Relaxed)
    }

    pub fn embed_calls(&self) -> u64 {
        self.embed_calls.load(Ordering::Relaxed)
    }

    fn scripted(&self, prompt: &str) -> String {
        let mut rng = seeded_rng(self.seed, &["chat", prompt]);
        let score = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
            (rng.random_range(lo..hi) * 10.0).round() / 10.0
        };
        match PromptKind::detect(prompt) {
            Some(PromptKind::Segmentation) => {
                let info = section_after(prompt, "determine the appropriate segmentation level:");
                format!("L{}", heuristic_level(info, &mut rng))
            }
            Some(kind @ (PromptKind::Categories | PromptKind::Scout)) => {
                let mut obj = serde_json::Map::new();
                for cat in Category::ALL {
                    let values = cat.values();
                    let v = values[rng.random_range(0..values.len())];
                    obj.insert(cat.name().to_string(), v.into());
                }
                if kind == PromptKind::Scout {
                    let info = section_after(prompt, "Startup Information:");
                    let info = info.split("\n\nAlso include four descriptive fields").next().unwrap_or(info);
                    let first_line = info.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
                    obj.insert("name".into(), first_line.trim().trim_start_matches("Name:").trim().into());
                    let description = section_after(info, "Description:");
                    let description = description.split("\n\n").next().unwrap_or("").trim();
                    let description = if description.is_empty() { info.trim() } else { description };
                    obj.insert("description".into(), description.into());
                    obj.insert("regulatory_approvals".into(), "Not specified".into());
                    obj.insert("patents".into(), "None disclosed".into());
                }
                format!("```json\n{}\n```", serde_json::to_string_pretty(&obj).unwrap())
            }
            Some(PromptKind::Market) => format!(
                "Market analysis: the addressable market shows {} growth with moderate competition.\nMarket viability score: {}/10",
                if rng.random_bool(0.5) { "steady" } else { "uneven" },
                score(&mut rng, 3.0, 9.5)
            ),
            Some(PromptKind::Product) => format!(
                "Product analysis: the product is technically feasible with identifiable risks.\n-Product potential score: {}/10\n-Innovation score: {}/10\n-Market fit score: {}/10",
                score(&mut rng, 3.0, 9.5),
                score(&mut rng, 3.0, 9.5),
                score(&mut rng, 3.0, 9.5)
            ),
            Some(PromptKind::Founder) => format!(
                "Founder analysis: the team shows relevant experience.\nCompetency score: {}/10",
                score(&mut rng, 3.0, 9.5)
            ),
            Some(PromptKind::Integration) => {
                let overall = score(&mut rng, 3.0, 9.0);
                let rec = if overall >= 6.5 { "Invest" } else { "Hold" };
                format!(
                    "Weighing the specialist reports against the statistical signals.\nRecommendation: {rec}\nOverall score: {overall}/10\nConfidence: {:.2}",
                    rng.random_range(0.4..0.95)
                )
            }
            Some(PromptKind::Quant) | Some(PromptKind::Baseline) => {
                let p: f64 = (rng.random_range(0.05..0.95) * 100.0f64).round() / 100.0;
                let outcome = if p >= 0.5 { "Successful" } else { "Unsuccessful" };
                serde_json::json!({
                    "outcome": outcome,
                    "probability": p,
                    "reasoning": "Synthetic decision from the offline mock provider.",
                })
                .to_string()
            }
            Some(PromptKind::Keywords) => {
                let desc = section_after(prompt, "Startup description:");
                let head: Vec<&str> = desc
                    .split(|c: char| !c.is_alphanumeric())
                    .filter(|w| w.len() > 3)
                    .take(3)
                    .collect();
                let topic = if head.is_empty() { "Startup".to_string() } else { head.join(" ") };
                format!("{topic} Market, Growth, Trend, Size, Revenue")
            }
            Some(PromptKind::Synthesis) => {
                let results = section_after(prompt, "Search results:");
                format!("Market research synthesis (offline mock):\n{}", results.trim())
            }
            None => "Mock response.".to_string(),
        }
    }
}

fn section_after<'a>(prompt: &'a str, marker: &str) -> &'a str {
    prompt
        .find(marker)
        .map(|i| &prompt[i + marker.len()..])
        .unwrap_or("")
}

/// Cheap keyword reading of a founder profile, with a seeded fallback.
fn heuristic_level(info: &str, rng: &mut ChaCha8Rng) -> u8 {
    let t = info.to_lowercase();
    let any = |words: &[&str]| words.iter().any(|w| t.contains(w));
    if any(&["ipo", "$100m", "took public", "taken public", "unicorn"]) {
        5
    } else if any(&[
        "exit",
        "acquired",
        "vice president",
        "vp ",
        "cto at",
        "executive",
    ]) {
        4
    } else if any(&["phd", "ph.d", "15 years", "12 years", "10 years", "mba"]) {
        3
    } else if any(&[
        "google",
        "mckinsey",
        "accelerator",
        "y combinator",
        "years at",
    ]) {
        2
    } else {
        rng.random_range(1..=2)
    }
}

impl LlmProvider for MockProvider {
    fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        self.chat_calls.fetch_add(1, Ordering::Relaxed);
        let prompt = &request.user_prompt;
        if let Some(r) = self.canned.get(&prompt_hash(prompt)) {
            return Ok(r.clone());
        }
        if let Some(r) = PromptKind::detect(prompt).and_then(|k| self.overrides.get(&k)) {
            return Ok(r.clone());
        }
        if let Some(f) = &self.responder {
            return Ok(f(request));
        }
        Ok(self.scripted(prompt))
    }

    /// Bag-of-words embedding: each lowercase token maps to a seeded random
    /// direction; the sum is normalized. Texts sharing words get positive cosine.
    fn embed(&self, request: &EmbeddingRequest) -> Result<Vec<f64>, GatewayError> {
        self.embed_calls.fetch_add(1, Ordering::Relaxed);
        if request.dimension == 0 {
            return Err(GatewayError::InvalidRequest(
                "embedding dimension must be >= 1".into(),
            ));
        }
        let seed_str = self.seed.to_string();
        let mut acc = vec![0.0f64; request.dimension];
        let lower = request.text.to_lowercase();
        let tokens: Vec<&str> = lower
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .collect();
        for tok in tokens.iter().copied().chain(std::iter::once("\u{0}bias")) {
            let mut rng = seeded_rng(self.seed, &["embed", &seed_str, tok]);
            for a in acc.iter_mut() {
                *a += rng.random_range(-1.0..1.0);
            }
        }
        let n = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(acc.into_iter().map(|x| x / n).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{Gateway, PromptKind};

    fn chat(prompt: &str) -> ChatRequest {
        ChatRequest::new("sys", prompt, "m")
    }

    #[test]
    fn canned_passthrough() {
        let m = MockProvider::new(0).with_canned("who?", "L3");
        assert_eq!(m.chat(&chat("who?")).unwrap(), "L3");
    }

    #[test]
    fn pure_in_prompt_and_seed() {
        let a = MockProvider::new(7);
        let b = MockProvider::new(7);
        let p = PromptKind::Market
            .template()
            .render_pairs(&[
                ("startup_info", "x"),
                ("market_info", "y"),
                ("keywords", "k"),
                ("external_knowledge", "e"),
            ])
            .unwrap();
        assert_eq!(a.chat(&chat(&p)).unwrap(), b.chat(&chat(&p)).unwrap());
        let e1 = a.embed(&EmbeddingRequest::new("hello world", 100)).unwrap();
        let e2 = b.embed(&EmbeddingRequest::new("hello world", 100)).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(e1.len(), 100);
    }

    #[test]
    fn embeddings_are_unit_and_nondegenerate() {
        let m = MockProvider::new(1);
        let a = m
            .embed(&EmbeddingRequest::new("AI health wearable", 100))
            .unwrap();
        let b = m
            .embed(&EmbeddingRequest::new(
                "wearable for health monitoring",
                100,
            ))
            .unwrap();
        let c = m
            .embed(&EmbeddingRequest::new("industrial cement logistics", 100))
            .unwrap();
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        assert!((dot(&a, &a) - 1.0).abs() < 1e-12);
        assert!(dot(&a, &b) > dot(&a, &c));
        assert!(dot(&a, &b) < 0.999);
    }

    #[test]
    fn override_by_template() {
        let m = MockProvider::new(0).with_override(PromptKind::Keywords, "");
        let p = PromptKind::Keywords
            .template()
            .render_pairs(&[("description", "d")])
            .unwrap();
        assert_eq!(m.chat(&chat(&p)).unwrap(), "");
    }

    #[test]
    fn gateway_cache_skips_mock() {
        let m = Arc::new(MockProvider::new(0));
        let gw = Gateway::new(m.clone()).with_memory_cache();
        gw.complete(&chat("same")).unwrap();
        gw.complete(&chat("same")).unwrap();
        assert_eq!(m.chat_calls(), 1);
        assert_eq!(gw.stats().cache_hits, 1);
    }
}
