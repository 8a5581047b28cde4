//! Evaluation harness: labelled datasets, stratified samples, the zero-shot
//! baseline and full pipeline runs, metrics and result files.

pub mod output;
pub mod stats;

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyst::scores::parse_quant_decision;
use crate::analyst::Pipeline;
use crate::domain::{
    validate_startup, FinalReport, FounderProfile, Outcome, SegmentLevel, StartupRecord,
};
use crate::llm::prompts::SYSTEM_PROMPT;
use crate::llm::{ChatRequest, Gateway, GatewayError, PromptKind};
use crate::rf::MetricsError;

pub use output::{emit_results, render_comparison_table, ComparisonRow, MetricsFile};
pub use stats::{
    bias_metrics, confusion_from_rates, group_stats, welch_t_test, BiasMetrics, GroupStats,
    WelchTest,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("need {needed} {label} entries, only {available} available")]
    InsufficientClass {
        label: Outcome,
        needed: usize,
        available: usize,
    },
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl EvalError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        EvalError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// A founder given either as plain text or as a full profile.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum FounderField {
    Text(String),
    Profile(FounderProfile),
}

#[derive(Debug, Deserialize)]
struct RawEntry {
    id: Option<String>,
    name: String,
    description: String,
    founders: Vec<FounderField>,
    label: Option<Outcome>,
    level: Option<SegmentLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub startup: StartupRecord,
    pub label: Outcome,
    /// Precomputed founder level, if the dataset carries one.
    pub level: Option<SegmentLevel>,
}

#[derive(Debug, Deserialize)]
struct RawStartup {
    name: String,
    description: String,
    founders: Vec<FounderField>,
    #[serde(default)]
    label: Option<Outcome>,
}

fn founder_profiles(fields: Vec<FounderField>) -> Vec<FounderProfile> {
    fields
        .into_iter()
        .map(|f| match f {
            FounderField::Text(t) => FounderProfile::new(t),
            FounderField::Profile(p) => p,
        })
        .collect()
}

/// A single startup document. Founders may be plain strings or profiles.
/// The record is not validated here.
pub fn parse_startup(text: &str) -> Result<StartupRecord, serde_json::Error> {
    let raw: RawStartup = serde_json::from_str(text)?;
    Ok(StartupRecord {
        name: raw.name,
        description: raw.description,
        founders: founder_profiles(raw.founders),
        label: raw.label,
    })
}

/// Parse JSONL text. Blank lines are skipped; line numbers are 1-based.
/// Entries without an `id` get `line-NNNNN`.
pub fn parse_dataset(text: &str) -> Result<Vec<DatasetEntry>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| EvalError::Parse {
            line: line_no,
            message,
        };
        let raw: RawEntry = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let label = raw.label.ok_or_else(|| err("missing label".into()))?;
        let founders = founder_profiles(raw.founders);
        let startup = validate_startup(StartupRecord {
            name: raw.name,
            description: raw.description,
            founders,
            label: Some(label),
        })
        .map_err(|e| err(e.to_string()))?;
        out.push(DatasetEntry {
            id: raw.id.unwrap_or_else(|| format!("line-{line_no:05}")),
            startup,
            label,
            level: raw.level,
        });
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetEntry>, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    let entries = parse_dataset(&text)?;
    if entries.is_empty() {
        log::warn!("{}: dataset is empty", path.display());
    }
    Ok(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    #[serde(alias = "baseline_zero_shot")]
    Baseline,
    #[default]
    Ssff,
}

impl EvalMode {
    pub fn label(self) -> &'static str {
        match self {
            EvalMode::Baseline => "Baseline",
            EvalMode::Ssff => "SSFF",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub n_success: usize,
    pub n_failure: usize,
    pub seed: u64,
    pub mode: EvalMode,
    pub model_id: String,
    /// Entries evaluated at once.
    pub parallelism: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_success: 10,
            n_failure: 40,
            seed: 42,
            mode: EvalMode::Ssff,
            model_id: crate::llm::DEFAULT_CHAT_MODEL.to_string(),
            parallelism: 4,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.n_success + self.n_failure < 2 {
            return Err(EvalError::InvalidConfig(
                "n_success + n_failure must be at least 2".into(),
            ));
        }
        if self.parallelism == 0 {
            return Err(EvalError::InvalidConfig(
                "parallelism must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Exactly `n_success` successes and `n_failure` failures, drawn without
/// replacement and shuffled, reproducible from `seed`.
pub fn stratified_sample(
    entries: &[DatasetEntry],
    config: &EvalConfig,
) -> Result<Vec<DatasetEntry>, EvalError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sample = Vec::with_capacity(config.n_success + config.n_failure);
    for (label, needed) in [
        (Outcome::Success, config.n_success),
        (Outcome::Failure, config.n_failure),
    ] {
        let pool: Vec<&DatasetEntry> = entries.iter().filter(|e| e.label == label).collect();
        if pool.len() < needed {
            return Err(EvalError::InsufficientClass {
                label,
                needed,
                available: pool.len(),
            });
        }
        let picked = rand::seq::index::sample(&mut rng, pool.len(), needed);
        sample.extend(picked.into_iter().map(|i| pool[i].clone()));
    }
    sample.shuffle(&mut rng);
    Ok(sample)
}

/// Map `f` over `items` with at most `parallelism` threads; output keeps input order.
pub fn bounded_map<T: Sync, R: Send>(
    items: &[T],
    parallelism: usize,
    f: impl Fn(&T) -> R + Sync,
) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let workers = parallelism.clamp(1, items.len().max(1));
    let mut indexed: Vec<(usize, R)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        local.push((i, f(item)));
                    }
                    local
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("evaluation worker"))
            .collect()
    });
    indexed.sort_by_key(|(i, _)| *i);
    indexed.into_iter().map(|(_, r)| r).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub label: Outcome,
    pub predicted: Outcome,
    pub probability: Option<f64>,
    /// The answer could not be parsed and the prediction is a fallback.
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub id: String,
    pub label: Outcome,
    pub report: FinalReport,
}

/// Everything one evaluation run produced, sorted by entry id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub mode: EvalMode,
    pub model_id: String,
    pub predictions: Vec<Prediction>,
    pub failures: Vec<EntryFailure>,
    pub reports: Vec<EntryReport>,
}

impl EvalRun {
    fn sorted(mut self) -> Self {
        self.predictions.sort_by(|a, b| a.id.cmp(&b.id));
        self.failures.sort_by(|a, b| a.id.cmp(&b.id));
        self.reports.sort_by(|a, b| a.id.cmp(&b.id));
        self
    }

    pub fn labels(&self) -> (Vec<Outcome>, Vec<Outcome>) {
        self.predictions
            .iter()
            .map(|p| (p.label, p.predicted))
            .unzip()
    }
}

pub fn baseline_prompt(entry: &DatasetEntry) -> String {
    PromptKind::Baseline
        .template()
        .render_pairs(&[
            ("founder_info", &entry.startup.founders_text()),
            ("description", entry.startup.description.trim()),
        ])
        .expect("baseline template bindings")
}

/// One zero-shot prompt per entry. An unparseable answer counts as a
/// predicted success and is flagged, so parse failures can only inflate the
/// over-prediction bias, never hide it.
pub fn run_baseline(
    sample: &[DatasetEntry],
    gateway: &Gateway,
    model_id: &str,
    parallelism: usize,
) -> Result<EvalRun, EvalError> {
    let results = bounded_map(sample, parallelism, |e| {
        let answer = gateway.complete(&ChatRequest::new(
            SYSTEM_PROMPT,
            baseline_prompt(e),
            model_id,
        ))?;
        Ok::<_, GatewayError>(match parse_quant_decision(&answer) {
            Ok(q) => Prediction {
                id: e.id.clone(),
                label: e.label,
                predicted: q.outcome,
                probability: Some(q.probability.get()),
                flagged: false,
            },
            Err(err) => {
                log::warn!(
                    "{}: unparseable baseline answer ({err}); counted as Successful",
                    e.id
                );
                Prediction {
                    id: e.id.clone(),
                    label: e.label,
                    predicted: Outcome::Success,
                    probability: None,
                    flagged: true,
                }
            }
        })
    });
    let predictions = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(EvalRun {
        mode: EvalMode::Baseline,
        model_id: model_id.to_string(),
        predictions,
        failures: Vec::new(),
        reports: Vec::new(),
    }
    .sorted())
}

/// Full pipeline per entry. Failed entries are recorded and skipped.
pub fn run_ssff(sample: &[DatasetEntry], pipeline: &Pipeline<'_>, parallelism: usize) -> EvalRun {
    let results = bounded_map(sample, parallelism, |e| {
        pipeline.run(&e.startup).map_err(|err| err.to_string())
    });
    let mut run = EvalRun {
        mode: EvalMode::Ssff,
        model_id: pipeline.config.models.default.clone(),
        predictions: Vec::new(),
        failures: Vec::new(),
        reports: Vec::new(),
    };
    for (e, r) in sample.iter().zip(results) {
        match r {
            Ok(out) => {
                let q = &out.report.quant_decision;
                run.predictions.push(Prediction {
                    id: e.id.clone(),
                    label: e.label,
                    predicted: q.outcome,
                    probability: Some(q.probability.get()),
                    flagged: false,
                });
                run.reports.push(EntryReport {
                    id: e.id.clone(),
                    label: e.label,
                    report: out.report,
                });
            }
            Err(error) => {
                log::warn!("{}: pipeline failed: {error}", e.id);
                run.failures.push(EntryFailure {
                    id: e.id.clone(),
                    error,
                });
            }
        }
    }
    run.sorted()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;
    use std::sync::Arc;

    use super::*;
    use crate::analyst::PipelineConfig;
    use crate::llm::{LlmProvider, MockProvider};
    use crate::rf::classification_report;

    fn line(id: usize, label: u8) -> String {
        format!(
            r#"{{"id":"s{id:03}","name":"Startup {id}","description":"Tool number {id} for logistics teams","founders":["Founder {id}, 5 years in ops"],"label":{label}}}"#
        )
    }

    fn pool(n_success: usize, n_failure: usize) -> Vec<DatasetEntry> {
        let text: Vec<String> = (0..n_success + n_failure)
            .map(|i| line(i, u8::from(i < n_success)))
            .collect();
        parse_dataset(&text.join("\n")).unwrap()
    }

    #[test]
    fn parsing() {
        assert_eq!(pool(1, 2).len(), 3);
        let bad = format!(
            "{}\n{}",
            line(0, 1),
            r#"{"name":"x","description":"d","founders":["f"]}"#
        );
        assert!(matches!(
            parse_dataset(&bad),
            Err(EvalError::Parse { line: 2, .. })
        ));
        assert!(parse_dataset("").unwrap().is_empty());
        let profile = r#"{"name":"x","description":"d","founders":[{"raw_text":"f","structured_hints":{"school":"MIT"}}],"label":"successful","level":"L3"}"#;
        let e = &parse_dataset(profile).unwrap()[0];
        assert_eq!(e.id, "line-00001");
        assert_eq!(e.level.map(|l| l.get()), Some(3));
        assert!(e.startup.founders[0].prompt_text().contains("MIT"));
    }

    #[test]
    fn sampling() {
        let entries = pool(30, 100);
        let cfg = EvalConfig::default();
        let s = stratified_sample(&entries, &cfg).unwrap();
        assert_eq!(s.len(), 50);
        assert_eq!(s.iter().filter(|e| e.label.is_success()).count(), 10);
        assert_eq!(s.iter().map(|e| &e.id).collect::<BTreeSet<_>>().len(), 50);
        assert_eq!(stratified_sample(&entries, &cfg).unwrap(), s);
        let other = stratified_sample(
            &entries,
            &EvalConfig {
                seed: 7,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_ne!(other, s);
        assert!(matches!(
            stratified_sample(&pool(5, 100), &cfg),
            Err(EvalError::InsufficientClass {
                label: Outcome::Success,
                needed: 10,
                available: 5
            })
        ));
    }

    #[test]
    fn bounded_map_keeps_order() {
        let xs: Vec<u32> = (0..37).collect();
        assert_eq!(
            bounded_map(&xs, 5, |x| x * 2),
            xs.iter().map(|x| x * 2).collect::<Vec<_>>()
        );
        assert!(bounded_map(&[] as &[u32], 3, |x| *x).is_empty());
    }

    #[test]
    fn baseline_always_successful() {
        let g = Gateway::new(Arc::new(MockProvider::new(0).with_override(
            PromptKind::Baseline,
            r#"{"outcome":"Successful","probability":0.9,"reasoning":"optimism"}"#,
        )));
        let sample = stratified_sample(&pool(10, 40), &EvalConfig::default()).unwrap();
        let run = run_baseline(&sample, &g, "m", 4).unwrap();
        let (t, p) = run.labels();
        let r = classification_report(&t, &p).unwrap();
        assert_eq!(
            (r.success.recall, r.success.precision, r.accuracy),
            (1.0, 0.2, 0.2)
        );
    }

    #[test]
    fn baseline_oracle_and_unparseable() {
        let g = Gateway::new(Arc::new(MockProvider::new(0).with_responder(|r| {
            let success =
                r.user_prompt.contains("Founder 0,") || r.user_prompt.contains("Founder 1,");
            let outcome = if success {
                "Successful"
            } else {
                "Unsuccessful"
            };
            format!(r#"{{"outcome":"{outcome}","probability":0.5,"reasoning":"r"}}"#)
        })));
        let sample = pool(2, 3);
        let run = run_baseline(&sample, &g, "m", 2).unwrap();
        assert!(run.predictions.iter().all(|p| p.label == p.predicted));

        let g = Gateway::new(Arc::new(
            MockProvider::new(0).with_override(PromptKind::Baseline, "probably fine"),
        ));
        let run = run_baseline(&sample, &g, "m", 2).unwrap();
        assert!(run
            .predictions
            .iter()
            .all(|p| p.flagged && p.predicted == Outcome::Success));
    }

    #[test]
    fn ssff_keeps_going_after_a_failure() {
        let scripted = MockProvider::new(3);
        let g = Gateway::new(Arc::new(MockProvider::new(3).with_responder(move |r| {
            if r.user_prompt.contains("Founder 2,")
                && PromptKind::detect(&r.user_prompt) == Some(PromptKind::Founder)
            {
                "no score here".into()
            } else {
                scripted.chat(r).unwrap()
            }
        })));
        let pipeline = Pipeline::new(&g, PipelineConfig::default());
        let run = run_ssff(&pool(2, 3), &pipeline, 3);
        assert_eq!(run.predictions.len() + run.failures.len(), 5);
        assert_eq!(run.failures.len(), 1, "{:?}", run.failures);
        assert_eq!(run.failures[0].id, "s002");
        assert_eq!(run.reports.len(), 4);
    }
}
