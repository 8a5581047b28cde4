//! The analyst pipeline: scout categorization, three specialist agents, an
//! integrating chief analyst and a quantitative decision, assembled into a
//! [`FinalReport`](crate::domain::FinalReport) with an audit trail.

pub mod agents;
pub mod pipeline;
pub mod scores;

use thiserror::Error;

use crate::domain::DomainError;
use crate::fit::FitError;
use crate::llm::structured::StructuredError;
use crate::llm::GatewayError;
use crate::segmentation::SegmentationError;

pub use agents::{
    integrate, quant_decide, run_founder_agent, run_market_agent, run_product_agent, scout,
    AgentKind, AgentReport, IntegrationDecision, ModelSignals, ScoutCategorization,
};
pub use pipeline::{
    run_pipeline, write_run_artifacts, AuditEntry, Pipeline, PipelineConfig, PipelineError,
    PipelineRun, Stage, StageModels,
};
pub use scores::parse_quant_decision;

#[derive(Debug, Error)]
pub enum AnalystError {
    #[error("{agent} agent gave no usable `{score}` score")]
    ScoreUnparseable {
        agent: AgentKind,
        score: &'static str,
    },
    #[error("integration answer lacks a usable `{0}`")]
    RecommendationUnparseable(&'static str),
    #[error(transparent)]
    Structured(#[from] StructuredError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Segmentation(SegmentationError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

impl From<SegmentationError> for AnalystError {
    fn from(e: SegmentationError) -> Self {
        match e {
            SegmentationError::Gateway(g) => AnalystError::Gateway(g),
            SegmentationError::NoFounders => AnalystError::Precondition("no founders".into()),
            other => AnalystError::Segmentation(other),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::domain::{serialize_report, FounderProfile, StartupRecord};
    use crate::knowledge::search::MockSearch;
    use crate::llm::{Gateway, MockProvider, PromptKind};

    fn startup() -> StartupRecord {
        StartupRecord {
            name: "Wearwell".into(),
            description: "AI wearable that monitors pet health in real time".into(),
            founders: vec![
                FounderProfile::new(
                    "Zorblat Quinn: veterinarian, PhD, 12 years in animal health research",
                ),
                FounderProfile::new(
                    "Mirel Vask: previously VP engineering, company acquired in 2019",
                ),
            ],
            label: None,
        }
    }

    fn gateway(seed: u64) -> Gateway {
        Gateway::new(Arc::new(MockProvider::new(seed))).with_memory_cache()
    }

    #[test]
    fn mock_run_is_deterministic_and_complete() {
        let search = MockSearch::new(5);
        let (g1, g2) = (gateway(7), gateway(7));
        let a = Pipeline::new(&g1, PipelineConfig::default())
            .with_search(&search)
            .run(&startup())
            .unwrap();
        let b = Pipeline::new(&g2, PipelineConfig::default())
            .with_search(&search)
            .run(&startup())
            .unwrap();
        assert_eq!(serialize_report(&a.report), serialize_report(&b.report));
        assert_eq!(a.audit, b.audit);
        assert_eq!(a.report.segmentation.level.get(), 4);
        assert!(!a
            .report
            .degraded
            .contains(&"no_external_knowledge".to_string()));
        assert!(a.report.degraded.contains(&"rf_model_missing".to_string()));
        assert!(a.report.degraded.contains(&"fit_model_missing".to_string()));
        let stages: Vec<Stage> = a.audit.iter().map(|e| e.stage).collect();
        assert!(stages.windows(2).all(|w| w[0] <= w[1]));
        assert!(stages.contains(&Stage::Quant) && stages.contains(&Stage::Research));
    }

    #[test]
    fn specialists_see_disjoint_inputs() {
        let g = gateway(1);
        let s = startup();
        let run = Pipeline::new(&g, PipelineConfig::default())
            .run(&s)
            .unwrap();
        let prompt_of = |stage| {
            run.audit
                .iter()
                .find(|e| e.stage == stage)
                .map(|e| e.exchanges[0].prompt.clone())
                .unwrap()
        };
        let (market, product, founder) = (
            prompt_of(Stage::Market),
            prompt_of(Stage::Product),
            prompt_of(Stage::Founder),
        );
        for f in &s.founders {
            for word in ["Zorblat", "Mirel", "veterinarian"] {
                if f.raw_text.contains(word) {
                    assert!(
                        !market.contains(word) && !product.contains(word),
                        "{word} leaked"
                    );
                }
            }
            assert!(founder.contains(f.raw_text.trim()));
        }
        assert!(!founder.contains(&s.description));
        assert!(!founder.contains("market_size"));
        assert!(market.contains("market_size") && !market.contains("development_pace"));
        assert!(product.contains("development_pace") && !product.contains("market_size"));
    }

    #[test]
    fn search_disabled_degrades() {
        let g = gateway(2);
        let run = Pipeline::new(&g, PipelineConfig::default())
            .run(&startup())
            .unwrap();
        assert!(run
            .report
            .degraded
            .contains(&"no_external_knowledge".to_string()));
        let market = run.audit.iter().find(|e| e.stage == Stage::Market).unwrap();
        assert!(market.exchanges[0]
            .prompt
            .contains("No external knowledge available."));
    }

    #[test]
    fn hard_failures_are_stage_tagged() {
        let mut s = startup();
        s.founders.clear();
        let g = gateway(3);
        let err = Pipeline::new(&g, PipelineConfig::default())
            .run(&s)
            .unwrap_err();
        assert_eq!(err.stage, Stage::Validate);
        assert!(err.is_validation());

        let g = Gateway::new(Arc::new(
            MockProvider::new(3).with_override(PromptKind::Founder, "No idea."),
        ));
        let err = Pipeline::new(&g, PipelineConfig::default())
            .run(&startup())
            .unwrap_err();
        assert_eq!(err.stage, Stage::Founder);
        assert!(!err.is_validation());
    }

    #[test]
    fn artifacts_written() {
        let g = gateway(4);
        let run = Pipeline::new(&g, PipelineConfig::default())
            .run(&startup())
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run_artifacts(&run, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("final_report.json")).unwrap();
        assert_eq!(
            crate::domain::deserialize_report(&text).unwrap(),
            run.report
        );
        assert!(dir.path().join("audit/01_scout.json").exists());
        assert!(dir.path().join("audit/12_quant.json").exists());
    }
}
