//! Records shared by every stage of the pipeline.
//!
//! These are plain values: construction validates ranges, serde carries them to
//! and from JSON with stable snake_case field names.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Default upper bound on a startup description, in characters.
pub const DEFAULT_MAX_DESCRIPTION_CHARS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("startup description is empty")]
    EmptyDescription,
    #[error("startup has no founders")]
    NoFounders,
    #[error("description has {len} characters, limit is {max}")]
    DescriptionTooLong { len: usize, max: usize },
    #[error("founder profile {index} has no text")]
    EmptyFounderText { index: usize },
    #[error("{field} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("invalid segment level {0}")]
    InvalidLevel(String),
    #[error("invalid outcome {0}")]
    InvalidOutcome(String),
    #[error("invalid recommendation {0}")]
    InvalidRecommendation(String),
}

/// Binary startup outcome. Encoded as `1` for success and `0` for failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Failure,
    Success,
}

impl Outcome {
    pub fn as_u8(self) -> u8 {
        match self {
            Outcome::Failure => 0,
            Outcome::Success => 1,
        }
    }

    pub fn from_bool(success: bool) -> Self {
        if success {
            Outcome::Success
        } else {
            Outcome::Failure
        }
    }

    pub fn is_success(self) -> bool {
        self == Outcome::Success
    }

    /// The wording used by the decision prompts.
    pub fn verdict(self) -> &'static str {
        match self {
            Outcome::Failure => "Unsuccessful",
            Outcome::Success => "Successful",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.verdict())
    }
}

impl FromStr for Outcome {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "success" | "successful" | "true" => Ok(Outcome::Success),
            "0" | "failure" | "unsuccessful" | "fail" | "false" => Ok(Outcome::Failure),
            _ => Err(DomainError::InvalidOutcome(s.to_string())),
        }
    }
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Outcome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => match n.as_u64() {
                Some(0) => Ok(Outcome::Failure),
                Some(1) => Ok(Outcome::Success),
                _ => Err(D::Error::custom(format!("invalid outcome {n}"))),
            },
            serde_json::Value::Bool(b) => Ok(Outcome::from_bool(b)),
            serde_json::Value::String(s) => s.parse().map_err(D::Error::custom),
            other => Err(D::Error::custom(format!("invalid outcome {other}"))),
        }
    }
}

/// Founder quality tier, `L1` (least experienced) to `L5` (elite).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentLevel(u8);

impl SegmentLevel {
    pub const ALL: [SegmentLevel; 5] = [
        SegmentLevel(1),
        SegmentLevel(2),
        SegmentLevel(3),
        SegmentLevel(4),
        SegmentLevel(5),
    ];

    pub fn new(level: u8) -> Result<Self, DomainError> {
        if (1..=5).contains(&level) {
            Ok(SegmentLevel(level))
        } else {
            Err(DomainError::InvalidLevel(level.to_string()))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Zero-based index, handy for per-level arrays.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }
}

impl fmt::Display for SegmentLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

impl FromStr for SegmentLevel {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = t.strip_prefix(['L', 'l']).unwrap_or(t);
        digits
            .parse::<u8>()
            .ok()
            .and_then(|n| SegmentLevel::new(n).ok())
            .ok_or_else(|| DomainError::InvalidLevel(s.to_string()))
    }
}

impl Serialize for SegmentLevel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SegmentLevel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => n
                .as_u64()
                .and_then(|v| u8::try_from(v).ok())
                .and_then(|v| SegmentLevel::new(v).ok())
                .ok_or_else(|| D::Error::custom(format!("invalid segment level {n}"))),
            serde_json::Value::String(s) => s.parse().map_err(D::Error::custom),
            other => Err(D::Error::custom(format!("invalid segment level {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Recommendation {
    Invest,
    Hold,
}

impl fmt::Display for Recommendation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Recommendation::Invest => "Invest",
            Recommendation::Hold => "Hold",
        })
    }
}

impl FromStr for Recommendation {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "invest" => Ok(Recommendation::Invest),
            "hold" => Ok(Recommendation::Hold),
            _ => Err(DomainError::InvalidRecommendation(s.to_string())),
        }
    }
}

macro_rules! bounded_real {
    ($(#[$meta:meta])* $name:ident, $field:literal, $min:expr, $max:expr) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
        #[serde(try_from = "f64", into = "f64")]
        pub struct $name(f64);

        impl $name {
            pub const MIN: f64 = $min;
            pub const MAX: f64 = $max;

            pub fn new(value: f64) -> Result<Self, DomainError> {
                if value.is_finite() && (Self::MIN..=Self::MAX).contains(&value) {
                    Ok(Self(value))
                } else {
                    Err(DomainError::OutOfRange {
                        field: $field,
                        value,
                        min: Self::MIN,
                        max: Self::MAX,
                    })
                }
            }

            pub fn get(self) -> f64 {
                self.0
            }
        }

        impl TryFrom<f64> for $name {
            type Error = DomainError;
            fn try_from(v: f64) -> Result<Self, Self::Error> {
                Self::new(v)
            }
        }

        impl From<$name> for f64 {
            fn from(v: $name) -> f64 {
                v.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(&self.0, f)
            }
        }
    };
}

bounded_real!(
    /// Analyst score on the 1..10 scale.
    Score, "score", 1.0, 10.0
);
bounded_real!(
    /// Probability or confidence in `[0, 1]`.
    Probability, "probability", 0.0, 1.0
);
bounded_real!(
    /// Founder-idea fit in `[-1, 1]`.
    FitValue, "fit_score", -1.0, 1.0
);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FounderProfile {
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub structured_hints: BTreeMap<String, String>,
}

impl FounderProfile {
    pub fn new(raw_text: impl Into<String>) -> Self {
        Self {
            raw_text: raw_text.into(),
            structured_hints: BTreeMap::new(),
        }
    }

    pub fn with_hint(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.structured_hints.insert(key.into(), value.into());
        self
    }

    /// Text handed to prompts: the free text followed by any structured hints.
    pub fn prompt_text(&self) -> String {
        let mut out = self.raw_text.trim().to_string();
        for (k, v) in &self.structured_hints {
            out.push_str(&format!("\n{k}: {v}"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartupRecord {
    pub name: String,
    pub description: String,
    pub founders: Vec<FounderProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Outcome>,
}

impl StartupRecord {
    /// Name and description as handed to startup-facing prompts.
    pub fn startup_info(&self) -> String {
        format!(
            "\nName: {}\nDescription: {}",
            self.name.trim(),
            self.description.trim()
        )
    }

    pub fn founders_text(&self) -> String {
        self.founders
            .iter()
            .map(FounderProfile::prompt_text)
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// Check a record against its invariants with the default description cap.
pub fn validate_startup(record: StartupRecord) -> Result<StartupRecord, DomainError> {
    validate_startup_with_limit(record, DEFAULT_MAX_DESCRIPTION_CHARS)
}

pub fn validate_startup_with_limit(
    record: StartupRecord,
    max_chars: usize,
) -> Result<StartupRecord, DomainError> {
    if record.description.trim().is_empty() {
        return Err(DomainError::EmptyDescription);
    }
    let len = record.description.chars().count();
    if len > max_chars {
        return Err(DomainError::DescriptionTooLong {
            len,
            max: max_chars,
        });
    }
    if record.founders.is_empty() {
        return Err(DomainError::NoFounders);
    }
    if let Some(index) = record
        .founders
        .iter()
        .position(|f| f.raw_text.trim().is_empty())
    {
        return Err(DomainError::EmptyFounderText { index });
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantDecision {
    pub outcome: Outcome,
    pub probability: Probability,
    pub reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationSummary {
    pub level: SegmentLevel,
    pub reasoning: String,
}

/// Everything a single pipeline run produces about one startup.
///
/// `confidence` is the integration agent's stated confidence; the quantitative
/// agent's probability lives in `quant_decision.probability`. Both are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalReport {
    pub name: String,
    pub market_report: String,
    pub market_viability_score: Score,
    pub product_report: String,
    pub product_viability_score: Score,
    pub product_innovation_score: Score,
    pub product_market_fit_score: Score,
    pub founder_report: String,
    pub founder_competency_score: Score,
    pub segmentation: SegmentationSummary,
    pub fit_score: FitValue,
    pub rf_prediction: Outcome,
    pub quant_decision: QuantDecision,
    pub recommendation: Recommendation,
    pub rationale: String,
    pub overall_score: Score,
    pub confidence: Probability,
    /// Stages that fell back to a degraded path, e.g. `no_external_knowledge`.
    #[serde(default)]
    pub degraded: Vec<String>,
}

pub fn serialize_report(report: &FinalReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn deserialize_report(text: &str) -> Result<FinalReport, serde_json::Error> {
    serde_json::from_str(text)
}


#[cfg(test)]
mod tests {
    use super::fixtures::sample_report;
    use super::*;
    use proptest::prelude::*;

    fn record(description: &str, founders: usize) -> StartupRecord {
        StartupRecord {
            name: "Acme".into(),
            description: description.into(),
            founders: (0..founders)
                .map(|i| FounderProfile::new(format!("founder {i}")))
                .collect(),
            label: None,
        }
    }

    #[test]
    fn valid_record_passes_unchanged() {
        let r = record("AI wearable", 1);
        assert_eq!(validate_startup(r.clone()).unwrap(), r);
    }

    #[test]
    fn empty_description_rejected() {
        assert_eq!(
            validate_startup(record("   ", 1)),
            Err(DomainError::EmptyDescription)
        );
    }

    #[test]
    fn no_founders_rejected() {
        assert_eq!(
            validate_startup(record("AI wearable", 0)),
            Err(DomainError::NoFounders)
        );
    }

    #[test]
    fn long_description_rejected() {
        let long = "x".repeat(1001);
        assert!(matches!(
            validate_startup(record(&long, 1)),
            Err(DomainError::DescriptionTooLong {
                len: 1001,
                max: 1000
            })
        ));
        assert!(validate_startup_with_limit(record(&long, 1), 2000).is_ok());
    }

    #[test]
    fn report_json_carries_values() {
        let text = serialize_report(&sample_report());
        assert!(text.contains("\"overall_score\": 8.0"));
        assert!(text.contains("\"confidence\": 0.85"));
        assert!(text.contains("\"level\": \"L5\""));
        assert!(text.contains("\"fit_score\": 0.58861464"));
        assert_eq!(deserialize_report(&text).unwrap(), sample_report());
    }

    #[test]
    fn deserialize_rejects_out_of_range_score() {
        let text = serialize_report(&sample_report())
            .replace("\"overall_score\": 8.0", "\"overall_score\": 11.0");
        assert!(deserialize_report(&text).is_err());
    }

    #[test]
    fn level_and_outcome_parsing() {
        assert_eq!("L3".parse::<SegmentLevel>().unwrap().get(), 3);
        assert_eq!("4".parse::<SegmentLevel>().unwrap().get(), 4);
        assert!("L6".parse::<SegmentLevel>().is_err());
        assert_eq!("Successful".parse::<Outcome>().unwrap(), Outcome::Success);
        assert_eq!("unsuccessful".parse::<Outcome>().unwrap(), Outcome::Failure);
        let o: Outcome = serde_json::from_str("1").unwrap();
        assert_eq!(o, Outcome::Success);
    }

    proptest! {
        #[test]
        fn scores_outside_range_rejected(v in prop_oneof![-1e6f64..0.999, 10.001f64..1e6]) {
            prop_assert!(Score::new(v).is_err());
        }

        #[test]
        fn probabilities_outside_range_rejected(v in prop_oneof![-1e6f64..-1e-9, 1.0000001f64..1e6]) {
            prop_assert!(Probability::new(v).is_err());
            let fit = if v > 0.0 { v * 2.0 } else { v * 2.0 - 1.0 };
            prop_assert!(FitValue::new(fit).is_err());
        }

        #[test]
        fn report_round_trip(overall in 1.0f64..=10.0, conf in 0.0f64..=1.0, fit in -1.0f64..=1.0, level in 1u8..=5) {
            let mut r = sample_report();
            r.overall_score = Score::new(overall).unwrap();
            r.confidence = Probability::new(conf).unwrap();
            r.fit_score = FitValue::new(fit).unwrap();
            r.segmentation.level = SegmentLevel::new(level).unwrap();
            prop_assert_eq!(deserialize_report(&serialize_report(&r)).unwrap(), r);
        }
    }
}
