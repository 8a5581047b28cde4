//! Founder segmentation into levels L1 to L5 and per-level success statistics.

use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{FounderProfile, Outcome, SegmentLevel};
use crate::llm::prompts::SYSTEM_PROMPT;
use crate::llm::{ChatRequest, Gateway, GatewayError, PromptKind};

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("no single level token in response: {0:?}")]
    UnparseableLevel(String),
    #[error("no founder profiles given")]
    NoFounders,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("no (level, outcome) pairs")]
    Empty,
    #[error("level {0} has no observations")]
    MissingLevel(SegmentLevel),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationResult {
    pub level: SegmentLevel,
    pub raw_response: String,
    pub prompt: String,
}

/// The level named in a model answer: the standalone `L1`..`L5` token, provided
/// it is the only distinct level mentioned.
pub fn parse_level(response: &str) -> Result<SegmentLevel, SegmentationError> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\bL([1-5])\b").expect("level regex"));
    let mut found: Option<u8> = None;
    for cap in re.captures_iter(response) {
        let level = cap[1].parse::<u8>().expect("single digit");
        match found {
            Some(prev) if prev != level => {
                return Err(SegmentationError::UnparseableLevel(response.to_string()))
            }
            _ => found = Some(level),
        }
    }
    found
        .and_then(|l| SegmentLevel::new(l).ok())
        .ok_or_else(|| SegmentationError::UnparseableLevel(response.to_string()))
}

pub fn segment_founder(
    profile: &FounderProfile,
    gateway: &Gateway,
    model_id: &str,
) -> Result<SegmentationResult, SegmentationError> {
    let prompt = PromptKind::Segmentation
        .template()
        .render_pairs(&[("founder_info", &profile.prompt_text())])
        .expect("segmentation template binds founder_info");
    let raw_response =
        gateway.complete(&ChatRequest::new(SYSTEM_PROMPT, prompt.clone(), model_id))?;
    let level = parse_level(&raw_response)?;
    Ok(SegmentationResult {
        level,
        raw_response,
        prompt,
    })
}

/// Segment every founder concurrently. The team level is the highest individual level.
pub fn segment_team(
    founders: &[FounderProfile],
    gateway: &Gateway,
    model_id: &str,
) -> Result<(SegmentLevel, Vec<SegmentationResult>), SegmentationError> {
    if founders.is_empty() {
        return Err(SegmentationError::NoFounders);
    }
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = founders
            .iter()
            .map(|f| s.spawn(move || segment_founder(f, gateway, model_id)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("segmentation thread"))
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let level = results.iter().map(|r| r.level).max().expect("non-empty");
    Ok((level, results))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelRow {
    pub level: SegmentLevel,
    pub success_count: u64,
    pub failure_count: u64,
    pub success_rate: f64,
    /// `success_rate / rate(L1)`; `None` when L1 never succeeded.
    pub multiplier_vs_l1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub rows: [LevelRow; 5],
}

/// Founder counts per level from the reference cohort: (successes, failures).
pub const REFERENCE_COUNTS: [(u64, u64); 5] =
    [(24, 75), (83, 223), (287, 445), (514, 249), (93, 8)];

impl LevelStats {
    /// Build from per-level (success, failure) counts, indexed L1..L5.
    pub fn from_counts(counts: [(u64, u64); 5]) -> Result<Self, StatsError> {
        for (i, (s, f)) in counts.iter().enumerate() {
            if s + f == 0 {
                return Err(StatsError::MissingLevel(SegmentLevel::ALL[i]));
            }
        }
        let rate = |(s, f): (u64, u64)| s as f64 / (s + f) as f64;
        let base = rate(counts[0]);
        let rows = std::array::from_fn(|i| {
            let r = rate(counts[i]);
            LevelRow {
                level: SegmentLevel::ALL[i],
                success_count: counts[i].0,
                failure_count: counts[i].1,
                success_rate: r,
                multiplier_vs_l1: match i {
                    0 => Some(1.0),
                    _ if base > 0.0 => Some(r / base),
                    _ => None,
                },
            }
        });
        Ok(Self { rows })
    }

    /// Statistics of the reference cohort, used when no training data is given.
    pub fn reference() -> Self {
        Self::from_counts(REFERENCE_COUNTS).expect("reference counts are complete")
    }

    pub fn row(&self, level: SegmentLevel) -> &LevelRow {
        &self.rows[level.index()]
    }

    /// Plain-text table embedded in the quantitative decision prompt.
    pub fn level_table(&self) -> String {
        let mut s = String::from("Level | Success | Failure | Success Rate | Multiplier vs L1\n");
        for r in &self.rows {
            let mult = match r.multiplier_vs_l1 {
                Some(m) if r.level.get() > 1 => format!("{m:.2}"),
                _ => "-".to_string(),
            };
            let _ = writeln!(
                s,
                "{} | {} | {} | {:.2}% | {}",
                r.level,
                r.success_count,
                r.failure_count,
                r.success_rate * 100.0,
                mult
            );
        }
        s.truncate(s.trim_end().len());
        s
    }
}

impl Default for LevelStats {
    fn default() -> Self {
        Self::reference()
    }
}

pub fn compute_level_stats(pairs: &[(SegmentLevel, Outcome)]) -> Result<LevelStats, StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut counts = [(0u64, 0u64); 5];
    for (level, outcome) in pairs {
        let c = &mut counts[level.index()];
        if outcome.is_success() {
            c.0 += 1;
        } else {
            c.1 += 1;
        }
    }
    LevelStats::from_counts(counts)
}

pub fn lookup_success_rate(stats: &LevelStats, level: SegmentLevel) -> f64 {
    stats.row(level).success_rate
}
