//! LLM extraction of the fourteen categorical features.

use super::categories::{category_schema, CategoricalFeatures, Category};
use crate::domain::StartupRecord;
use crate::llm::prompts::{CORRECTIVE_SUFFIX, SYSTEM_PROMPT};
use crate::llm::structured::{extract_json_object, parse_structured_lenient, StructuredError};
use crate::llm::{ChatRequest, Exchange, Gateway, GatewayError, ParseAttemptError, PromptKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub features: CategoricalFeatures,
    pub exchanges: Vec<Exchange>,
    pub warnings: Vec<String>,
}

/// Fill features from an answer; fields that are absent or off-enumeration stay
/// `Mismatch`. Returns the names of the fields that fell back.
pub fn features_from_answer(
    text: &str,
) -> Result<(CategoricalFeatures, Vec<String>), StructuredError> {
    let (record, issues) = parse_structured_lenient(text, &category_schema())?;
    let mut features = CategoricalFeatures::all_mismatch();
    for c in Category::ALL {
        if let Some(v) = record.get(c.name()).and_then(|v| v.as_str()) {
            features.set_label(c, v);
        }
    }
    Ok((features, issues.into_iter().map(|i| i.field).collect()))
}

pub fn extract_categories(
    startup: &StartupRecord,
    gateway: &Gateway,
    model_id: &str,
) -> Result<Extraction, GatewayError> {
    let prompt = PromptKind::Categories
        .template()
        .render_pairs(&[("startup_info", &startup.startup_info())])
        .expect("categories template binds startup_info");
    let request = ChatRequest::new(SYSTEM_PROMPT, prompt, model_id);
    let parse = |t: &str| {
        extract_json_object(t)
            .map(|_| ())
            .ok_or(StructuredError::NoJsonFound)
    };
    let (answer, exchanges) = match gateway.complete_parsed(&request, CORRECTIVE_SUFFIX, parse) {
        Ok(((), exchanges)) => (exchanges.last().map(|e| e.response.clone()), exchanges),
        Err(ParseAttemptError::Gateway(e)) => return Err(e),
        Err(ParseAttemptError::Parse { exchanges, .. }) => (None, exchanges),
    };
    let mut warnings = Vec::new();
    let features = match answer.as_deref().map(features_from_answer) {
        Some(Ok((features, fallen))) => {
            if !fallen.is_empty() {
                warnings.push(format!("mismatch fallback for: {}", fallen.join(", ")));
            }
            features
        }
        _ => {
            warnings.push("no JSON in category answer; all fields set to Mismatch".to_string());
            CategoricalFeatures::all_mismatch()
        }
    };
    for w in &warnings {
        log::warn!("{}: {w}", startup.name);
    }
    Ok(Extraction {
        features,
        exchanges,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::domain::FounderProfile;
    use crate::llm::MockProvider;
    use crate::rf::categories::CategoryValue;

    fn startup() -> StartupRecord {
        StartupRecord {
            name: "Ledgerly".into(),
            description: "Blockchain payments for small merchants".into(),
            founders: vec![FounderProfile::new("Ex-banker")],
            label: None,
        }
    }

    fn run(answer: &str) -> Extraction {
        let gw = Gateway::new(Arc::new(
            MockProvider::new(0).with_override(PromptKind::Categories, answer),
        ));
        extract_categories(&startup(), &gw, "m").unwrap()
    }

    #[test]
    fn all_na_passthrough() {
        let obj: serde_json::Map<String, serde_json::Value> = Category::ALL
            .iter()
            .map(|c| (c.name().to_string(), "N/A".into()))
            .collect();
        let e = run(&serde_json::Value::Object(obj).to_string());
        for c in Category::ALL {
            assert_eq!(e.features.label(c), "N/A");
        }
        assert_eq!(e.exchanges.len(), 1);
    }

    #[test]
    fn off_enumeration_value_is_mismatch() {
        let e = run(r#"{"market_size": "Huge", "industry_growth": "Yes"}"#);
        assert_eq!(
            e.features.get(Category::MarketSize),
            CategoryValue::Mismatch
        );
        assert_eq!(e.features.label(Category::IndustryGrowth), "Yes");
        assert!(e.warnings[0].contains("market_size"));
    }

    #[test]
    fn sample_answer_parsed_verbatim() {
        let answer = r#"```json
{"industry_growth": "Yes", "market_size": "Large", "development_pace": "Faster",
 "market_adaptability": "Very Adaptable", "execution_capabilities": "Excellent",
 "funding_amount": "Above Average", "valuation_change": "Increased",
 "investor_backing": "Highly Regarded", "reviews_testimonials": "Positive",
 "product_market_fit": "Strong", "sentiment_analysis": "Positive",
 "innovation_mentions": "Often", "cutting_edge_technology": "Emphasized",
 "timing": "Just Right"}
```"#;
        let e = run(answer);
        assert_eq!(e.features.mismatch_count(), 0);
        assert_eq!(e.features.label(Category::Timing), "Just Right");
        assert!(e.warnings.is_empty());
    }

    #[test]
    fn prose_answer_retries_then_falls_back() {
        let e = run("I cannot say.");
        assert_eq!(e.exchanges.len(), 2);
        assert!(e.exchanges[1].prompt.ends_with(CORRECTIVE_SUFFIX));
        assert_eq!(e.features, CategoricalFeatures::all_mismatch());
        assert_eq!(e.warnings.len(), 1);
    }
}
