use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::scores::{
    parse_decision_fields, parse_named_score, parse_quant_decision, parse_single_score,
};
use super::AnalystError;
use crate::domain::{
    FounderProfile, Outcome, Probability, QuantDecision, Recommendation, Score, SegmentLevel,
    StartupRecord,
};
use crate::llm::prompts::{
    CORRECTIVE_SUFFIX, DECISION_CORRECTIVE_SUFFIX, SCORE_CORRECTIVE_SUFFIX, SYSTEM_PROMPT,
};
use crate::llm::structured::{parse_structured_lenient, FieldSpec};
use crate::llm::{ChatRequest, Exchange, Gateway, ParseAttemptError, PromptKind};
use crate::rf::categories::category_schema;
use crate::rf::{CategoricalFeatures, Category};
use crate::segmentation::LevelStats;

const DESCRIPTIVE_FIELDS: [&str; 4] = ["name", "description", "regulatory_approvals", "patents"];

/// Categories handed to the market agent.
pub const MARKET_CATEGORIES: [Category; 8] = [
    Category::IndustryGrowth,
    Category::MarketSize,
    Category::MarketAdaptability,
    Category::Timing,
    Category::FundingAmount,
    Category::ValuationChange,
    Category::InvestorBacking,
    Category::SentimentAnalysis,
];

/// Categories handed to the product agent.
pub const PRODUCT_CATEGORIES: [Category; 6] = [
    Category::DevelopmentPace,
    Category::ExecutionCapabilities,
    Category::ReviewsTestimonials,
    Category::ProductMarketFit,
    Category::InnovationMentions,
    Category::CuttingEdgeTechnology,
];

/// The scout's structured view of a startup: the fourteen categories plus
/// four free-text fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoutCategorization {
    pub features: CategoricalFeatures,
    pub name: String,
    pub description: String,
    pub regulatory_approvals: String,
    pub patents: String,
}

impl ScoutCategorization {
    pub fn from_answer(text: &str) -> Option<(Self, Vec<String>)> {
        let mut schema = category_schema();
        schema.extend(
            DESCRIPTIVE_FIELDS
                .iter()
                .map(|f| FieldSpec::text(f).optional()),
        );
        let (record, issues) = parse_structured_lenient(text, &schema).ok()?;
        let mut features = CategoricalFeatures::all_mismatch();
        for c in Category::ALL {
            if let Some(v) = record.get(c.name()).and_then(|v| v.as_str()) {
                features.set_label(c, v);
            }
        }
        let text_field = |k: &str| {
            record
                .get(k)
                .and_then(|v| v.as_str())
                .map(|s| s.trim().to_string())
                .unwrap_or_default()
        };
        let scout = Self {
            features,
            name: text_field("name"),
            description: text_field("description"),
            regulatory_approvals: text_field("regulatory_approvals"),
            patents: text_field("patents"),
        };
        Some((scout, issues.into_iter().map(|i| i.field).collect()))
    }

    /// Startup-side context for the specialist prompts. Falls back to the
    /// input record for empty descriptive fields.
    pub fn startup_info(&self, record: &StartupRecord) -> String {
        let pick = |a: &str, b: &str| {
            if a.trim().is_empty() {
                b.trim().to_string()
            } else {
                a.trim().to_string()
            }
        };
        format!(
            "\nName: {}\nDescription: {}",
            pick(&self.name, &record.name),
            pick(&self.description, &record.description)
        )
    }

    fn lines(&self, cats: &[Category]) -> Vec<String> {
        cats.iter()
            .map(|c| format!("{}: {}", c.name(), self.features.label(*c)))
            .collect()
    }

    pub fn market_info(&self) -> String {
        self.lines(&MARKET_CATEGORIES).join("\n")
    }

    pub fn product_info(&self) -> String {
        let mut lines = self.lines(&PRODUCT_CATEGORIES);
        let or_na = |s: &str| {
            if s.is_empty() {
                "N/A".to_string()
            } else {
                s.to_string()
            }
        };
        lines.push(format!(
            "regulatory_approvals: {}",
            or_na(&self.regulatory_approvals)
        ));
        lines.push(format!("patents: {}", or_na(&self.patents)));
        lines.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoutOutcome {
    pub scout: ScoutCategorization,
    pub exchange: Exchange,
    /// Fields that fell back to `Mismatch` or empty text.
    pub fallbacks: Vec<String>,
    /// The answer had no JSON object at all.
    pub unparsed: bool,
}

/// One call with the scout prompt. Unparseable answers degrade to an
/// all-`Mismatch` record rather than failing.
pub fn scout(
    startup: &StartupRecord,
    gateway: &Gateway,
    model_id: &str,
) -> Result<ScoutOutcome, AnalystError> {
    let prompt = PromptKind::Scout
        .template()
        .render_pairs(&[("startup_info", &startup.startup_info())])
        .expect("scout template binds startup_info");
    let response = gateway.complete(&ChatRequest::new(SYSTEM_PROMPT, prompt.clone(), model_id))?;
    let exchange = Exchange { prompt, response };
    let (scout, fallbacks, unparsed) = match ScoutCategorization::from_answer(&exchange.response) {
        Some((s, f)) => (s, f, false),
        None => {
            let s = ScoutCategorization {
                features: CategoricalFeatures::all_mismatch(),
                name: String::new(),
                description: String::new(),
                regulatory_approvals: String::new(),
                patents: String::new(),
            };
            (
                s,
                Category::ALL.iter().map(|c| c.name().to_string()).collect(),
                true,
            )
        }
    };
    Ok(ScoutOutcome {
        scout,
        exchange,
        fallbacks,
        unparsed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Market,
    Product,
    Founder,
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AgentKind::Market => "market",
            AgentKind::Product => "product",
            AgentKind::Founder => "founder",
        })
    }
}

/// Score keys, in the order each agent declares them.
pub const MARKET_VIABILITY: &str = "market_viability";
pub const PRODUCT_POTENTIAL: &str = "product_potential";
pub const INNOVATION: &str = "innovation";
pub const MARKET_FIT: &str = "market_fit";
pub const COMPETENCY: &str = "competency";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub kind: AgentKind,
    pub text: String,
    pub scores: BTreeMap<String, Score>,
    pub exchanges: Vec<Exchange>,
}

impl AgentReport {
    /// A declared score. Panics on an undeclared key, which is a programming error.
    pub fn score(&self, key: &str) -> f64 {
        self.scores
            .get(key)
            .unwrap_or_else(|| panic!("{} report has no `{key}` score", self.kind))
            .get()
    }
}

type ScoreParser = fn(&str) -> Result<BTreeMap<String, Score>, &'static str>;

fn run_agent(
    kind: AgentKind,
    prompt: String,
    gateway: &Gateway,
    model_id: &str,
    parse: ScoreParser,
) -> Result<AgentReport, AnalystError> {
    let request = ChatRequest::new(SYSTEM_PROMPT, prompt, model_id);
    match gateway.complete_parsed(&request, SCORE_CORRECTIVE_SUFFIX, parse) {
        Ok((scores, exchanges)) => Ok(AgentReport {
            kind,
            text: exchanges
                .last()
                .map(|e| e.response.clone())
                .unwrap_or_default(),
            scores,
            exchanges,
        }),
        Err(ParseAttemptError::Gateway(e)) => Err(e.into()),
        Err(ParseAttemptError::Parse { error, .. }) => Err(AnalystError::ScoreUnparseable {
            agent: kind,
            score: error,
        }),
    }
}

fn single(
    key: &'static str,
    labels: &[&str],
    text: &str,
) -> Result<BTreeMap<String, Score>, &'static str> {
    let v = parse_single_score(text, labels).ok_or(key)?;
    Ok(BTreeMap::from([(
        key.to_string(),
        Score::new(v).map_err(|_| key)?,
    )]))
}

fn market_scores(text: &str) -> Result<BTreeMap<String, Score>, &'static str> {
    single(
        MARKET_VIABILITY,
        &[
            "market viability score",
            "market viability",
            "viability score",
        ],
        text,
    )
}

fn founder_scores(text: &str) -> Result<BTreeMap<String, Score>, &'static str> {
    single(
        COMPETENCY,
        &["competency score", "founder competency", "competency"],
        text,
    )
}

fn product_scores(text: &str) -> Result<BTreeMap<String, Score>, &'static str> {
    let specs: [(&'static str, &[&str], &str); 3] = [
        (
            PRODUCT_POTENTIAL,
            &[
                "product potential score",
                "potential score",
                "product viability score",
                "product viability",
            ],
            "potential",
        ),
        (INNOVATION, &["innovation score"], "innovation"),
        (
            MARKET_FIT,
            &[
                "market fit score",
                "market-fit score",
                "product-market fit score",
            ],
            "fit",
        ),
    ];
    let mut out = BTreeMap::new();
    for (key, labels, json_key) in specs {
        let v = parse_named_score(text, labels, json_key).ok_or(key)?;
        out.insert(key.to_string(), Score::new(v).map_err(|_| key)?);
    }
    Ok(out)
}

pub fn run_market_agent(
    startup_info: &str,
    market_info: &str,
    keywords: &str,
    external_knowledge: &str,
    gateway: &Gateway,
    model_id: &str,
) -> Result<AgentReport, AnalystError> {
    let prompt = PromptKind::Market
        .template()
        .render_pairs(&[
            ("startup_info", startup_info),
            ("market_info", market_info),
            ("keywords", keywords),
            ("external_knowledge", external_knowledge),
        ])
        .expect("market template bindings");
    run_agent(AgentKind::Market, prompt, gateway, model_id, market_scores)
}

pub fn run_product_agent(
    startup_info: &str,
    product_info: &str,
    external_knowledge: &str,
    gateway: &Gateway,
    model_id: &str,
) -> Result<AgentReport, AnalystError> {
    let prompt = PromptKind::Product
        .template()
        .render_pairs(&[
            ("startup_info", startup_info),
            ("product_info", product_info),
            ("external_knowledge", external_knowledge),
        ])
        .expect("product template bindings");
    run_agent(
        AgentKind::Product,
        prompt,
        gateway,
        model_id,
        product_scores,
    )
}

pub fn run_founder_agent(
    founders: &[FounderProfile],
    gateway: &Gateway,
    model_id: &str,
) -> Result<AgentReport, AnalystError> {
    if founders.is_empty() {
        return Err(AnalystError::Precondition(
            "founder agent needs at least one founder".into(),
        ));
    }
    let info = founders
        .iter()
        .map(FounderProfile::prompt_text)
        .collect::<Vec<_>>()
        .join("\n\n");
    let prompt = PromptKind::Founder
        .template()
        .render_pairs(&[("founder_info", &info)])
        .expect("founder template bindings");
    run_agent(
        AgentKind::Founder,
        prompt,
        gateway,
        model_id,
        founder_scores,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationDecision {
    pub recommendation: Recommendation,
    pub rationale: String,
    pub overall_score: Score,
    pub confidence: Probability,
}

/// Read a full decision from an integration answer; `Err` names the first missing field.
pub fn parse_integration(text: &str) -> Result<IntegrationDecision, &'static str> {
    let d = parse_decision_fields(text);
    let recommendation = d.recommendation.ok_or("recommendation")?;
    let overall_score = d
        .overall_score
        .and_then(|v| Score::new(v).ok())
        .ok_or("overall_score")?;
    let confidence = d
        .confidence
        .and_then(|v| Probability::new(v).ok())
        .ok_or("confidence")?;
    Ok(IntegrationDecision {
        recommendation,
        rationale: text.trim().to_string(),
        overall_score,
        confidence,
    })
}

fn fmt_score(v: f64) -> String {
    format!("{v}/10")
}

/// Inputs to the integration agent beyond the three specialist reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSignals {
    pub fit: f64,
    pub segmentation: SegmentLevel,
    pub rf_prediction: Outcome,
}

pub fn integrate(
    market: &AgentReport,
    product: &AgentReport,
    founder: &AgentReport,
    signals: ModelSignals,
    gateway: &Gateway,
    model_id: &str,
) -> Result<(IntegrationDecision, Vec<Exchange>), AnalystError> {
    let market_info = format!(
        "{} - {}",
        fmt_score(market.score(MARKET_VIABILITY)),
        market.text.trim()
    );
    let product_info = format!(
        "{} (innovation {}, market fit {}) - {}",
        fmt_score(product.score(PRODUCT_POTENTIAL)),
        fmt_score(product.score(INNOVATION)),
        fmt_score(product.score(MARKET_FIT)),
        product.text.trim()
    );
    let founder_info = format!(
        "{} - {}",
        fmt_score(founder.score(COMPETENCY)),
        founder.text.trim()
    );
    let prompt = PromptKind::Integration
        .template()
        .render_pairs(&[
            ("market_info", &market_info),
            ("product_info", &product_info),
            ("founder_info", &founder_info),
            ("founder_idea_fit", &format!("{:.8}", signals.fit)),
            ("founder_segmentation", &signals.segmentation.to_string()),
            ("rf_prediction", signals.rf_prediction.verdict()),
        ])
        .expect("integration template bindings");
    let request = ChatRequest::new(SYSTEM_PROMPT, prompt, model_id);
    match gateway.complete_parsed(&request, DECISION_CORRECTIVE_SUFFIX, parse_integration) {
        Ok(v) => Ok(v),
        Err(ParseAttemptError::Gateway(e)) => Err(e.into()),
        Err(ParseAttemptError::Parse { error, .. }) => {
            Err(AnalystError::RecommendationUnparseable(error))
        }
    }
}

pub fn quant_decide(
    rf_prediction: Outcome,
    segmentation: SegmentLevel,
    fit: f64,
    stats: &LevelStats,
    gateway: &Gateway,
    model_id: &str,
) -> Result<(QuantDecision, Vec<Exchange>), AnalystError> {
    if !(-1.0..=1.0).contains(&fit) {
        return Err(AnalystError::Precondition(format!(
            "fit {fit} outside [-1, 1]"
        )));
    }
    let prompt = PromptKind::Quant
        .template()
        .render_pairs(&[
            ("level_table", &stats.level_table()),
            ("rf_prediction", rf_prediction.verdict()),
            ("Founder_Segmentation", &segmentation.to_string()),
            ("Founder_Idea_Fit", &format!("{fit:.8}")),
        ])
        .expect("quant template bindings");
    let request = ChatRequest::new(SYSTEM_PROMPT, prompt, model_id);
    match gateway.complete_parsed(&request, CORRECTIVE_SUFFIX, parse_quant_decision) {
        Ok(v) => Ok(v),
        Err(ParseAttemptError::Gateway(e)) => Err(e.into()),
        Err(ParseAttemptError::Parse { error, .. }) => Err(AnalystError::Structured(error)),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::llm::structured::StructuredError;
    use crate::llm::MockProvider;

    fn gw(mock: MockProvider) -> Gateway {
        Gateway::new(Arc::new(mock))
    }

    fn fintech() -> StartupRecord {
        StartupRecord {
            name: "Startup ABC".into(),
            description: "Revolutionizing the fintech industry with blockchain payments".into(),
            founders: vec![FounderProfile::new("CEO, ex-Goldman, 12 years in payments")],
            label: None,
        }
    }

    #[test]
    fn scout_passes_descriptive_fields_through() {
        let answer = r#"{"industry_growth":"Yes","market_size":"Large","development_pace":"Faster",
            "market_adaptability":"Very Adaptable","execution_capabilities":"Excellent","funding_amount":"Above Average",
            "valuation_change":"Increased","investor_backing":"Highly Regarded","reviews_testimonials":"Positive",
            "product_market_fit":"Strong","sentiment_analysis":"Positive","innovation_mentions":"Often",
            "cutting_edge_technology":"Emphasized","timing":"Just Right","name":"Startup ABC",
            "description":"Revolutionizing the fintech industry","regulatory_approvals":"Pending",
            "patents":"2 patents on blockchain transaction algorithms"}"#;
        let g = gw(MockProvider::new(0).with_override(PromptKind::Scout, answer));
        let out = scout(&fintech(), &g, "m").unwrap();
        assert_eq!(
            out.scout.description,
            "Revolutionizing the fintech industry"
        );
        assert_eq!(
            out.scout.patents,
            "2 patents on blockchain transaction algorithms"
        );
        assert_eq!(out.scout.features.mismatch_count(), 0);
        assert!(out.fallbacks.is_empty());
    }

    #[test]
    fn scout_missing_patents_is_empty_text() {
        let g = gw(MockProvider::new(0)
            .with_override(PromptKind::Scout, r#"{"name":"X","market_size":"Huge"}"#));
        let out = scout(&fintech(), &g, "m").unwrap();
        assert_eq!(out.scout.patents, "");
        assert_eq!(out.scout.name, "X");
        assert!(out.fallbacks.contains(&"market_size".to_string()));
        assert!(out.scout.product_info().contains("patents: N/A"));
    }

    #[test]
    fn market_score_parsed() {
        let g = gw(MockProvider::new(0)
            .with_override(PromptKind::Market, "Big market. Viability score: 8.5/10"));
        let r = run_market_agent("s", "m", "k", "e", &g, "m").unwrap();
        assert_eq!(r.score(MARKET_VIABILITY), 8.5);
        assert_eq!(r.exchanges.len(), 1);
    }

    #[test]
    fn missing_score_after_retry() {
        let g = gw(MockProvider::new(0).with_override(PromptKind::Market, "A fine market."));
        let err = run_market_agent("s", "m", "k", "e", &g, "m").unwrap_err();
        assert!(matches!(
            err,
            AnalystError::ScoreUnparseable {
                agent: AgentKind::Market,
                score: MARKET_VIABILITY
            }
        ));
    }

    #[test]
    fn product_scores_all_three_or_named_failure() {
        let g = gw(MockProvider::new(0).with_override(
            PromptKind::Product,
            "-Product potential score: 9/10\n-Innovation score: 8/10\n-Market fit score: 7.5/10",
        ));
        let r = run_product_agent("s", "p", "e", &g, "m").unwrap();
        assert_eq!(
            (
                r.score(PRODUCT_POTENTIAL),
                r.score(INNOVATION),
                r.score(MARKET_FIT)
            ),
            (9.0, 8.0, 7.5)
        );

        let g = gw(MockProvider::new(0).with_override(
            PromptKind::Product,
            "-Product potential score: 9/10\n-Market fit score: 7/10",
        ));
        let err = run_product_agent("s", "p", "e", &g, "m").unwrap_err();
        assert!(matches!(
            err,
            AnalystError::ScoreUnparseable {
                score: INNOVATION,
                ..
            }
        ));
    }

    #[test]
    fn founder_score_and_verbatim_text() {
        let text = "The founders are strong operators.\nCompetency score: 9.25";
        let g = gw(MockProvider::new(0).with_override(PromptKind::Founder, text));
        let r = run_founder_agent(&[FounderProfile::new("x")], &g, "m").unwrap();
        assert_eq!(r.score(COMPETENCY), 9.25);
        assert_eq!(r.text, text);
        assert!(matches!(
            run_founder_agent(&[], &g, "m"),
            Err(AnalystError::Precondition(_))
        ));
    }

    fn reports(g: &Gateway) -> (AgentReport, AgentReport, AgentReport) {
        (
            run_market_agent("s", "m", "k", "e", g, "m").unwrap(),
            run_product_agent("s", "p", "e", g, "m").unwrap(),
            run_founder_agent(&[FounderProfile::new("f")], g, "m").unwrap(),
        )
    }

    const SIGNALS: ModelSignals = ModelSignals {
        fit: 0.58861464,
        segmentation: SegmentLevel::ALL[4],
        rf_prediction: Outcome::Success,
    };

    #[test]
    fn integration_parse_and_prompt() {
        let g = gw(MockProvider::new(0).with_override(
            PromptKind::Integration,
            "Recommendation: Invest. Strong team. 8.2/10 overall, confidence 0.85",
        ));
        let (m, p, f) = reports(&g);
        let (d, ex) = integrate(&m, &p, &f, SIGNALS, &g, "m").unwrap();
        assert_eq!(d.recommendation, Recommendation::Invest);
        assert_eq!((d.overall_score.get(), d.confidence.get()), (8.2, 0.85));
        assert!(ex[0].prompt.contains("Founder-Idea Fit: 0.58861464"));
        assert!(ex[0].prompt.contains("Founder Segmentation: L5"));
        assert!(ex[0]
            .prompt
            .contains("Random Forest Prediction: Successful"));
    }

    #[test]
    fn integration_without_score_fails_on_that_field() {
        let g = gw(MockProvider::new(0).with_override(PromptKind::Integration, "Hold"));
        let (m, p, f) = reports(&g);
        let err = integrate(&m, &p, &f, SIGNALS, &g, "m").unwrap_err();
        assert!(matches!(
            err,
            AnalystError::RecommendationUnparseable("overall_score")
        ));
    }

    #[test]
    fn quant_decision_json() {
        let g = gw(MockProvider::new(0).with_override(
            PromptKind::Quant,
            r#"{"outcome":"Successful","probability":0.35,"reasoning":"L5 founder, moderate fit"}"#,
        ));
        let stats = LevelStats::reference();
        let (q, ex) =
            quant_decide(Outcome::Failure, SIGNALS.segmentation, 0.5, &stats, &g, "m").unwrap();
        assert_eq!(q.outcome, Outcome::Success);
        assert_eq!(q.probability.get(), 0.35);
        assert!(ex[0].prompt.contains("L5 | 93 | 8 | 92.08% | 3.80"));
        assert!(ex[0]
            .prompt
            .contains("categorical prediction outcome of Unsuccessful"));
        assert!(
            quant_decide(Outcome::Failure, SIGNALS.segmentation, 1.5, &stats, &g, "m").is_err()
        );

        let g = gw(MockProvider::new(0).with_override(
            PromptKind::Quant,
            r#"{"outcome":"Maybe","probability":0.3,"reasoning":"?"}"#,
        ));
        let err =
            quant_decide(Outcome::Failure, SIGNALS.segmentation, 0.0, &stats, &g, "m").unwrap_err();
        assert!(
            matches!(err, AnalystError::Structured(StructuredError::FieldInvalid { ref field, .. }) if field == "outcome")
        );
    }
}
