//! Full single-startup run and its audit trail.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::agents::{
    integrate, quant_decide, run_founder_agent, run_market_agent, run_product_agent, scout,
    AgentReport, ModelSignals, COMPETENCY, INNOVATION, MARKET_FIT, MARKET_VIABILITY,
    PRODUCT_POTENTIAL,
};
use super::AnalystError;
use crate::domain::{
    validate_startup_with_limit, FinalReport, FitValue, Outcome, SegmentationSummary,
    StartupRecord, DEFAULT_MAX_DESCRIPTION_CHARS,
};
use crate::fit::{embed_pair, predict_fit_from_pair, MlpModel};
use crate::knowledge::search::SearchProvider;
use crate::knowledge::{research, KnowledgeConfig};
use crate::llm::prompts::NO_EXTERNAL_KNOWLEDGE;
use crate::llm::{Exchange, Gateway, DEFAULT_CHAT_MODEL, DEFAULT_EMBEDDING_DIM};
use crate::rf::{encode, extract_categories, Forest};
use crate::segmentation::{segment_team, LevelStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validate,
    Scout,
    Research,
    Segmentation,
    Embedding,
    Categories,
    Market,
    Product,
    Founder,
    RandomForest,
    Fit,
    Integration,
    Quant,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Validate => "validate",
            Stage::Scout => "scout",
            Stage::Research => "research",
            Stage::Segmentation => "segmentation",
            Stage::Embedding => "embedding",
            Stage::Categories => "categories",
            Stage::Market => "market",
            Stage::Product => "product",
            Stage::Founder => "founder",
            Stage::RandomForest => "random_forest",
            Stage::Fit => "fit",
            Stage::Integration => "integration",
            Stage::Quant => "quant",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: AnalystError,
}

impl PipelineError {
    /// Whether the input, rather than a provider, is at fault.
    pub fn is_validation(&self) -> bool {
        matches!(
            self.source,
            AnalystError::Domain(_) | AnalystError::Precondition(_)
        )
    }
}

fn at<E: Into<AnalystError>>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError {
        stage,
        source: e.into(),
    }
}

/// Model id per stage, with a default for unlisted stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageModels {
    pub default: String,
    pub overrides: BTreeMap<Stage, String>,
}

impl Default for StageModels {
    fn default() -> Self {
        Self {
            default: DEFAULT_CHAT_MODEL.to_string(),
            overrides: BTreeMap::new(),
        }
    }
}

impl StageModels {
    pub fn for_stage(&self, stage: Stage) -> &str {
        self.overrides.get(&stage).unwrap_or(&self.default)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub models: StageModels,
    /// Used when no fit model fixes the dimension.
    pub embedding_dim: usize,
    pub knowledge: KnowledgeConfig,
    pub max_description_chars: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            models: StageModels::default(),
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            knowledge: KnowledgeConfig::default(),
            max_description_chars: DEFAULT_MAX_DESCRIPTION_CHARS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub stage: Stage,
    pub label: String,
    pub exchanges: Vec<Exchange>,
    pub parsed: Value,
}

/// Append-only record of every stage's prompts, answers and parsed values.
#[derive(Debug, Default)]
pub struct AuditTrail {
    entries: Mutex<Vec<AuditEntry>>,
}

impl AuditTrail {
    pub fn record(
        &self,
        stage: Stage,
        label: impl Into<String>,
        exchanges: Vec<Exchange>,
        parsed: Value,
    ) {
        self.entries.lock().expect("audit lock").push(AuditEntry {
            stage,
            label: label.into(),
            exchanges,
            parsed,
        });
    }

    /// Entries ordered by stage. Within a stage, insertion order is kept; each
    /// stage records from a single thread, so that order is deterministic.
    pub fn into_entries(self) -> Vec<AuditEntry> {
        let mut v = self.entries.into_inner().expect("audit lock");
        v.sort_by_key(|e| e.stage);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub report: FinalReport,
    pub audit: Vec<AuditEntry>,
}

/// Resources shared across runs. Models and search are optional; a missing
/// one degrades the run instead of failing it.
pub struct Pipeline<'a> {
    pub gateway: &'a Gateway,
    pub search: Option<&'a dyn SearchProvider>,
    pub forest: Option<&'a Forest<f64>>,
    pub fit_model: Option<&'a MlpModel<f64>>,
    pub level_stats: LevelStats,
    pub config: PipelineConfig,
}

impl<'a> Pipeline<'a> {
    pub fn new(gateway: &'a Gateway, config: PipelineConfig) -> Self {
        Self {
            gateway,
            search: None,
            forest: None,
            fit_model: None,
            level_stats: LevelStats::reference(),
            config,
        }
    }

    pub fn with_search(mut self, search: &'a dyn SearchProvider) -> Self {
        self.search = Some(search);
        self
    }

    pub fn with_forest(mut self, forest: &'a Forest<f64>) -> Self {
        self.forest = Some(forest);
        self
    }

    pub fn with_fit_model(mut self, model: &'a MlpModel<f64>) -> Self {
        self.fit_model = Some(model);
        self
    }

    pub fn with_level_stats(mut self, stats: LevelStats) -> Self {
        self.level_stats = stats;
        self
    }

    fn model(&self, stage: Stage) -> &str {
        self.config.models.for_stage(stage)
    }

    fn embedding_dim(&self) -> usize {
        match self.fit_model {
            Some(m) => (m.input_size().saturating_sub(1) / 2).max(1),
            None => self.config.embedding_dim,
        }
    }

    /// External knowledge text, keywords, and whether research succeeded.
    fn knowledge(
        &self,
        startup: &StartupRecord,
        context: &str,
        audit: &AuditTrail,
    ) -> (String, String, bool) {
        let provider = match self.search {
            Some(p) if self.config.knowledge.enabled => p,
            _ => {
                audit.record(
                    Stage::Research,
                    "skipped",
                    vec![],
                    json!({"reason": "search disabled"}),
                );
                return (NO_EXTERNAL_KNOWLEDGE.to_string(), "None".to_string(), false);
            }
        };
        match research(
            &startup.description,
            context,
            self.gateway,
            provider,
            &self.config.knowledge,
            self.model(Stage::Research),
        ) {
            Ok(r) => {
                let parsed = json!({
                    "keywords": r.keywords.as_slice(),
                    "n_results": r.results.len(),
                    "citations": r.report.citations,
                    "quantitative_points": r.report.quantitative_points,
                });
                audit.record(Stage::Research, "research", r.exchanges.clone(), parsed);
                (r.report.text, r.keywords.joined(), true)
            }
            Err(e) => {
                log::warn!("{}: external knowledge unavailable: {e}", startup.name);
                audit.record(
                    Stage::Research,
                    "failed",
                    vec![],
                    json!({"error": e.to_string()}),
                );
                (NO_EXTERNAL_KNOWLEDGE.to_string(), "None".to_string(), false)
            }
        }
    }

    pub fn run(&self, startup: &StartupRecord) -> Result<PipelineRun, PipelineError> {
        let startup =
            validate_startup_with_limit(startup.clone(), self.config.max_description_chars)
                .map_err(at(Stage::Validate))?;
        let audit = AuditTrail::default();
        let mut degraded = BTreeSet::new();

        let scouted =
            scout(&startup, self.gateway, self.model(Stage::Scout)).map_err(at(Stage::Scout))?;
        audit.record(
            Stage::Scout,
            "scout",
            vec![scouted.exchange.clone()],
            json!({"record": scouted.scout, "fallbacks": scouted.fallbacks}),
        );
        if scouted.unparsed {
            degraded.insert("scout_unparsed");
        }
        let sc = &scouted.scout;
        let context = sc.startup_info(&startup);

        // Independent inputs to the agents and models.
        let (knowledge, segmentation, pair, categories) = std::thread::scope(|s| {
            let k = s.spawn(|| self.knowledge(&startup, &context, &audit));
            let seg = s.spawn(|| {
                segment_team(
                    &startup.founders,
                    self.gateway,
                    self.model(Stage::Segmentation),
                )
            });
            let emb = s.spawn(|| {
                embed_pair(
                    self.gateway,
                    startup.description.trim(),
                    &startup.founders_text(),
                    self.embedding_dim(),
                )
            });
            let cat = extract_categories(&startup, self.gateway, self.model(Stage::Categories));
            (
                k.join().expect("research thread"),
                seg.join().expect("segmentation thread"),
                emb.join().expect("embedding thread"),
                cat,
            )
        });
        let (external, keywords, has_knowledge) = knowledge;
        if !has_knowledge {
            degraded.insert("no_external_knowledge");
        }
        let (level, per_founder) = segmentation.map_err(at(Stage::Segmentation))?;
        audit.record(
            Stage::Segmentation,
            "team",
            per_founder
                .iter()
                .map(|r| Exchange {
                    prompt: r.prompt.clone(),
                    response: r.raw_response.clone(),
                })
                .collect(),
            json!({"team_level": level, "levels": per_founder.iter().map(|r| r.level).collect::<Vec<_>>()}),
        );
        let pair = pair.map_err(at(Stage::Embedding))?;
        audit.record(
            Stage::Embedding,
            "pair",
            vec![],
            json!({"dim": pair.dim(), "cosine": pair.cosine}),
        );
        let categories = categories.map_err(at(Stage::Categories))?;
        audit.record(
            Stage::Categories,
            "categories",
            categories.exchanges.clone(),
            json!({"features": categories.features, "warnings": categories.warnings}),
        );
        if !categories.warnings.is_empty() {
            degraded.insert("category_mismatch");
        }

        let rf_prediction = match self.forest {
            Some(f) => {
                let p = f.predict_encoded(&encode(&categories.features));
                audit.record(
                    Stage::RandomForest,
                    "predict",
                    vec![],
                    json!({"outcome": p.outcome, "vote_fraction": p.vote_fraction}),
                );
                p.outcome
            }
            None => {
                degraded.insert("rf_model_missing");
                audit.record(
                    Stage::RandomForest,
                    "missing",
                    vec![],
                    json!({"outcome": Outcome::Failure}),
                );
                Outcome::Failure
            }
        };
        let fit = match self.fit_model {
            Some(m) => {
                let y = predict_fit_from_pair(m, &pair).map_err(at(Stage::Fit))?;
                audit.record(Stage::Fit, "model", vec![], json!({"fit": y}));
                y
            }
            None => {
                degraded.insert("fit_model_missing");
                audit.record(
                    Stage::Fit,
                    "cosine_fallback",
                    vec![],
                    json!({"fit": pair.cosine}),
                );
                pair.cosine
            }
        };

        let market_info = sc.market_info();
        let product_info = sc.product_info();
        let (market, product, founder) = std::thread::scope(|s| {
            let m = s.spawn(|| {
                run_market_agent(
                    &context,
                    &market_info,
                    &keywords,
                    &external,
                    self.gateway,
                    self.model(Stage::Market),
                )
            });
            let p = s.spawn(|| {
                run_product_agent(
                    &context,
                    &product_info,
                    &external,
                    self.gateway,
                    self.model(Stage::Product),
                )
            });
            let f = run_founder_agent(&startup.founders, self.gateway, self.model(Stage::Founder));
            (
                m.join().expect("market thread"),
                p.join().expect("product thread"),
                f,
            )
        });
        let market = market.map_err(at(Stage::Market))?;
        let product = product.map_err(at(Stage::Product))?;
        let founder = founder.map_err(at(Stage::Founder))?;
        for r in [&market, &product, &founder] {
            let stage = match r.kind {
                super::AgentKind::Market => Stage::Market,
                super::AgentKind::Product => Stage::Product,
                super::AgentKind::Founder => Stage::Founder,
            };
            audit.record(
                stage,
                r.kind.to_string(),
                r.exchanges.clone(),
                json!({"scores": r.scores}),
            );
        }

        let signals = ModelSignals {
            fit,
            segmentation: level,
            rf_prediction,
        };
        let (integration, quant) = std::thread::scope(|s| {
            let q = s.spawn(|| {
                quant_decide(
                    rf_prediction,
                    level,
                    fit,
                    &self.level_stats,
                    self.gateway,
                    self.model(Stage::Quant),
                )
            });
            let i = integrate(
                &market,
                &product,
                &founder,
                signals,
                self.gateway,
                self.model(Stage::Integration),
            );
            (i, q.join().expect("quant thread"))
        });
        let (decision, int_ex) = integration.map_err(at(Stage::Integration))?;
        audit.record(
            Stage::Integration,
            "integration",
            int_ex,
            serde_json::to_value(&decision).expect("serializable"),
        );
        let (quant, quant_ex) = quant.map_err(at(Stage::Quant))?;
        audit.record(
            Stage::Quant,
            "quant",
            quant_ex,
            serde_json::to_value(&quant).expect("serializable"),
        );

        let score = |r: &AgentReport, k| r.scores[k];
        let report = FinalReport {
            name: startup.name.clone(),
            market_report: market.text.clone(),
            market_viability_score: score(&market, MARKET_VIABILITY),
            product_report: product.text.clone(),
            product_viability_score: score(&product, PRODUCT_POTENTIAL),
            product_innovation_score: score(&product, INNOVATION),
            product_market_fit_score: score(&product, MARKET_FIT),
            founder_report: founder.text.clone(),
            founder_competency_score: score(&founder, COMPETENCY),
            segmentation: SegmentationSummary {
                level,
                reasoning: per_founder
                    .iter()
                    .enumerate()
                    .map(|(i, r)| format!("Founder {}: {}", i + 1, r.raw_response.trim()))
                    .collect::<Vec<_>>()
                    .join("\n"),
            },
            fit_score: FitValue::new(fit.clamp(-1.0, 1.0)).map_err(at(Stage::Fit))?,
            rf_prediction,
            quant_decision: quant,
            recommendation: decision.recommendation,
            rationale: decision.rationale,
            overall_score: decision.overall_score,
            confidence: decision.confidence,
            degraded: degraded.into_iter().map(String::from).collect(),
        };
        Ok(PipelineRun {
            report,
            audit: audit.into_entries(),
        })
    }
}

pub fn run_pipeline(
    startup: &StartupRecord,
    pipeline: &Pipeline<'_>,
) -> Result<PipelineRun, PipelineError> {
    pipeline.run(startup)
}

/// Write `final_report.json` and one `audit/NN_stage.json` per stage under `dir`.
pub fn write_run_artifacts(run: &PipelineRun, dir: &Path) -> io::Result<()> {
    let audit_dir = dir.join("audit");
    fs::create_dir_all(&audit_dir)?;
    fs::write(
        dir.join("final_report.json"),
        crate::domain::serialize_report(&run.report),
    )?;
    let mut by_stage: BTreeMap<Stage, Vec<&AuditEntry>> = BTreeMap::new();
    for e in &run.audit {
        by_stage.entry(e.stage).or_default().push(e);
    }
    for (stage, entries) in by_stage {
        let path = audit_dir.join(format!("{:02}_{}.json", stage as usize, stage.name()));
        fs::write(
            path,
            serde_json::to_string_pretty(&entries).expect("audit serializes"),
        )?;
    }
    Ok(())
}
