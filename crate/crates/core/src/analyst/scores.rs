//! Reading scores and decisions out of prose answers.

use std::sync::OnceLock;

use regex::Regex;
use serde_json::Value;

use crate::domain::{Outcome, Probability, QuantDecision, Recommendation};
use crate::llm::structured::{extract_json_object, parse_structured, FieldSpec, StructuredError};

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static regex"))
}

fn in_score_range(v: f64) -> bool {
    v.is_finite() && (1.0..=10.0).contains(&v)
}

/// The number that follows `label` on the same line, skipping a `(1-10)` scale hint.
/// A trailing denominator other than 10 disqualifies the match.
pub fn labeled_score(text: &str, label: &str) -> Option<f64> {
    static SCALE: OnceLock<Regex> = OnceLock::new();
    static VALUE: OnceLock<Regex> = OnceLock::new();
    let scale = re(
        &SCALE,
        r"(?i)^\s*\(?\s*(?:from\s+)?1\s*(?:-|–|to)\s*10\s*\)?",
    );
    let value = re(&VALUE, r"^[^\d\n]{0,24}?(\d+(?:\.\d+)?)(\s*/\s*(\d+))?");
    let lower = text.to_lowercase();
    let needle = label.to_lowercase();
    let mut from = 0;
    while let Some(pos) = lower[from..].find(&needle) {
        let start = from + pos + needle.len();
        from = start;
        let rest = &text[start..];
        let rest = &rest[scale.find(rest).map_or(0, |m| m.end())..];
        let Some(cap) = value.captures(rest) else {
            continue;
        };
        if cap.get(3).is_some_and(|d| d.as_str() != "10") {
            continue;
        }
        if let Ok(v) = cap[1].parse::<f64>() {
            if in_score_range(v) {
                return Some(v);
            }
        }
    }
    None
}

/// First `X/10` in the text with X in range.
pub fn slash_ten_score(text: &str) -> Option<f64> {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(&RE, r"(\d+(?:\.\d+)?)\s*/\s*10\b")
        .captures_iter(text)
        .filter_map(|c| c[1].parse::<f64>().ok())
        .find(|v| in_score_range(*v))
}

fn score_colon(text: &str) -> Option<f64> {
    static RE: OnceLock<Regex> = OnceLock::new();
    re(
        &RE,
        r"(?i)\bscore\b\s*(?:is|of)?\s*[:=]?\s*\**\s*(\d+(?:\.\d+)?)",
    )
    .captures_iter(text)
    .filter_map(|c| c[1].parse::<f64>().ok())
    .find(|v| in_score_range(*v))
}

/// A numeric JSON field whose key contains `key_part`.
fn json_score(text: &str, key_part: &str) -> Option<f64> {
    let obj = extract_json_object(text)?;
    obj.iter()
        .filter(|(k, _)| k.to_lowercase().contains(key_part))
        .filter_map(|(_, v)| match v {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.trim().trim_end_matches("/10").trim().parse().ok(),
            _ => None,
        })
        .find(|v| in_score_range(*v))
}

/// A single score: labelled forms first, then `X/10`, then `score: X`, then JSON.
pub fn parse_single_score(text: &str, labels: &[&str]) -> Option<f64> {
    labels
        .iter()
        .find_map(|l| labeled_score(text, l))
        .or_else(|| slash_ten_score(text))
        .or_else(|| score_colon(text))
        .or_else(|| json_score(text, "score"))
}

/// One of several scores in the same answer. Only label-specific forms are
/// accepted, since a bare `X/10` cannot be attributed.
pub fn parse_named_score(text: &str, labels: &[&str], json_key: &str) -> Option<f64> {
    labels
        .iter()
        .find_map(|l| labeled_score(text, l))
        .or_else(|| json_score(text, json_key))
}

/// Integration answer fields. Each is `None` when not found.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionFields {
    pub recommendation: Option<Recommendation>,
    pub overall_score: Option<f64>,
    pub confidence: Option<f64>,
}

pub fn parse_decision_fields(text: &str) -> DecisionFields {
    static REC: OnceLock<Regex> = OnceLock::new();
    static BARE: OnceLock<Regex> = OnceLock::new();
    static OVERALL: OnceLock<Regex> = OnceLock::new();
    static CONF: OnceLock<Regex> = OnceLock::new();
    let rec_re = re(
        &REC,
        r#"(?i)recommendation\**\s*[:\-]?\s*[*_"']*\s*(invest|hold)\b"#,
    );
    let labelled = rec_re.captures_iter(text).last();
    let (recommendation, rec_end) = match labelled {
        Some(c) => (c[1].parse().ok(), c.get(0).map_or(0, |m| m.end())),
        None => {
            let bare = re(&BARE, r"\b(Invest|Hold|INVEST|HOLD)\b");
            let found: Vec<_> = bare.captures_iter(text).collect();
            let distinct: std::collections::BTreeSet<String> =
                found.iter().map(|c| c[1].to_lowercase()).collect();
            if distinct.len() == 1 {
                let end = found[0].get(0).map_or(0, |m| m.end());
                (found[0][1].parse().ok(), end)
            } else {
                (None, 0)
            }
        }
    };

    let overall_re = re(
        &OVERALL,
        r"(?i)overall\s+(?:investment\s+)?(?:score|rating)\**\s*[:=\-]?\s*\**\s*(\d+(?:\.\d+)?)(\s*/\s*(\d+))?",
    );
    let overall_score = overall_re
        .captures_iter(text)
        .filter(|c| c.get(3).is_none_or(|d| d.as_str() == "10"))
        .filter_map(|c| c[1].parse::<f64>().ok())
        .filter(|v| in_score_range(*v))
        .last()
        .or_else(|| recommendation.and_then(|_| slash_ten_score(&text[rec_end..])));

    let conf_re = re(
        &CONF,
        r"(?i)confidence(?:\s+level)?\**\s*(?:is|of)?\s*[:=\-]?\s*\**\s*(\d+(?:\.\d+)?)\s*(%)?",
    );
    let confidence = conf_re
        .captures_iter(text)
        .filter_map(|c| {
            let v: f64 = c[1].parse().ok()?;
            let v = if c.get(2).is_some() || v > 1.0 {
                v / 100.0
            } else {
                v
            };
            (v.is_finite() && (0.0..=1.0).contains(&v)).then_some(v)
        })
        .last();

    DecisionFields {
        recommendation,
        overall_score,
        confidence,
    }
}

pub fn quant_schema() -> Vec<FieldSpec> {
    vec![
        FieldSpec::enumeration("outcome", &["Successful", "Unsuccessful"]),
        FieldSpec::number("probability", 0.0, 1.0),
        FieldSpec::text("reasoning"),
    ]
}

/// Parse the `{outcome, probability, reasoning}` object used by the
/// quantitative decision and the zero-shot baseline.
pub fn parse_quant_decision(text: &str) -> Result<QuantDecision, StructuredError> {
    let record = parse_structured(text, &quant_schema())?;
    let outcome = match record["outcome"].as_str() {
        Some("Successful") => Outcome::Success,
        _ => Outcome::Failure,
    };
    let p = record["probability"].as_f64().unwrap_or(f64::NAN);
    let probability = Probability::new(p).map_err(|_| StructuredError::FieldInvalid {
        field: "probability".into(),
        value: p.to_string(),
    })?;
    Ok(QuantDecision {
        outcome,
        probability,
        reasoning: record["reasoning"]
            .as_str()
            .unwrap_or_default()
            .trim()
            .to_string(),
    })
}
