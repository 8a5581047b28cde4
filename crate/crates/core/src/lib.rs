//! Startup success forecasting: founder segmentation, founder-idea fit,
//! a random forest over LLM-extracted categories, retrieval-backed market
//! research and a multi-agent analyst pipeline, plus an evaluation harness.
//!
//! Numeric cores are generic over [`scalar::Real`]; the aliases below fix the
//! scalar to `f64`, which is what the pipeline and CLI use.

pub mod analyst;
pub mod cli;
pub mod domain;
pub mod eval;
pub mod fit;
pub mod knowledge;
pub mod llm;
pub mod rf;
pub mod scalar;
pub mod segmentation;

pub use domain::{
    FinalReport, FounderProfile, Outcome, QuantDecision, Recommendation, SegmentLevel,
    StartupRecord,
};

pub type Forest = rf::Forest<f64>;
pub type DecisionTree = rf::DecisionTree<f64>;
pub type MlpModel = fit::MlpModel<f64>;
