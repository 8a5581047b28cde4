//! Command-line front end. Each command returns a [`CliError`] whose
//! [`code`](CliError::code) is the process exit status.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use thiserror::Error;

pub use config::AppConfig;

use crate::analyst::{run_pipeline, write_run_artifacts, Pipeline, PipelineError, Stage};
use crate::domain::{
    validate_startup_with_limit, FounderProfile, Outcome, SegmentLevel, StartupRecord,
};
use crate::eval::{
    self, emit_results, load_dataset, run_baseline, run_ssff, stratified_sample, EvalError,
    EvalMode,
};
use crate::fit::mlp::{gradient_check, train, write_loss_csv};
use crate::fit::{build_fit_features, embed_pair, preliminary_fit_score, EmbeddingPair, MlpModel};
use crate::knowledge::{research, KnowledgeError};
use crate::rf::forest::train_forest_encoded;
use crate::rf::{
    classification_report, stratified_split, CategoricalFeatures, Forest, ForestError,
};
use crate::segmentation::{segment_founder, segment_team, SegmentationError};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input, data or configuration. Exit 1.
    #[error("{0}")]
    Validation(String),
    /// The LLM or search provider failed. Exit 2.
    #[error("{0}")]
    Provider(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Provider(_) => 2,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Provider(e.to_string())
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Gateway(_) => CliError::Provider(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SegmentationError> for CliError {
    fn from(e: SegmentationError) -> Self {
        match e {
            SegmentationError::NoFounders => CliError::Validation(e.to_string()),
            _ => CliError::Provider(e.to_string()),
        }
    }
}

impl From<KnowledgeError> for CliError {
    fn from(e: KnowledgeError) -> Self {
        match e {
            KnowledgeError::EmptyDescription => CliError::Validation(e.to_string()),
            _ => CliError::Provider(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ssff",
    version,
    about = "Startup success forecasting with LLM analysts, a random forest and a founder-idea fit network"
)]
pub struct Cli {
    /// Use the deterministic offline providers; no secrets needed.
    #[arg(long, global = true)]
    pub mock: bool,
    /// Config file (default: ./ssff.json when present).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for sampling, training and the mock provider.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Chat model for every stage.
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline on one startup document.
    Analyze(AnalyzeArgs),
    /// Train the random forest on categorical feature rows.
    TrainRf(TrainRfArgs),
    /// Train the founder-idea fit network.
    TrainFit(TrainFitArgs),
    /// Evaluate on a labelled dataset.
    Evaluate(EvaluateArgs),
    /// Print the founder level for a profile or startup document.
    Segment(SegmentArgs),
    /// Run market research for a startup document.
    Research(ResearchArgs),
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Startup JSON document.
    pub input: PathBuf,
    /// Skip web search.
    #[arg(long)]
    pub no_search: bool,
    /// Trained forest from `train-rf`.
    #[arg(long, value_name = "FILE")]
    pub rf_model: Option<PathBuf>,
    /// Trained fit network from `train-fit`.
    #[arg(long, value_name = "FILE")]
    pub fit_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainRfArgs {
    /// JSONL rows of `{"features": {...}, "label": 0|1}`.
    pub data: PathBuf,
    /// Share of each class held out for the report.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Trees in the forest.
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// Maximum tree depth; unlimited when unset.
    #[arg(long)]
    pub max_depth: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainFitArgs {
    /// JSONL rows with `level`, `outcome` and either both vectors or both texts.
    pub data: PathBuf,
    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Compare analytic and numeric gradients after training.
    #[arg(long)]
    pub grad_check: bool,
    /// Embedding size for text rows.
    #[arg(long)]
    pub embedding_dim: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Baseline,
    Ssff,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Labelled JSONL dataset.
    pub dataset: PathBuf,
    /// Zero-shot baseline or the full pipeline.
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Successful startups in the sample.
    #[arg(long)]
    pub n_success: Option<usize>,
    /// Failed startups in the sample.
    #[arg(long)]
    pub n_failure: Option<usize>,
    /// Entries evaluated at once.
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Skip web search.
    #[arg(long)]
    pub no_search: bool,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Plain-text profile, profile JSON or startup JSON.
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct ResearchArgs {
    /// Startup JSON document.
    pub input: PathBuf,
}

impl Cli {
    /// Config file merged with global flags; flags win.
    pub fn app_config(&self) -> Result<AppConfig, CliError> {
        let mut c = AppConfig::load(self.config.as_deref())?;
        if self.mock {
            c.mock.enabled = true;
        }
        if let Some(out) = &self.out {
            c.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            c.eval.seed = seed;
            c.forest.seed = seed;
            c.mlp.seed = seed;
            c.mock.seed = seed;
        }
        if let Some(model) = &self.model {
            c.pipeline.models.default = model.clone();
            c.eval.model_id = model.clone();
        }
        Ok(c)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = cli.app_config()?;
    match cli.command {
        Command::Analyze(a) => cmd_analyze(config, a),
        Command::TrainRf(a) => cmd_train_rf(config, a),
        Command::TrainFit(a) => cmd_train_fit(config, a),
        Command::Evaluate(a) => cmd_evaluate(config, a),
        Command::Segment(a) => cmd_segment(config, a),
        Command::Research(a) => cmd_research(config, a),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Validation(format!("{}: {e}", dir.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn load_startup(path: &Path, max_chars: usize) -> Result<StartupRecord, CliError> {
    let text = read(path)?;
    let record = eval::parse_startup(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    validate_startup_with_limit(record, max_chars)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

type LoadedModels = (Option<Forest<f64>>, Option<MlpModel<f64>>);

/// Models named on the command line win over the config file.
fn load_models(
    config: &AppConfig,
    rf: Option<&Path>,
    fit: Option<&Path>,
) -> Result<LoadedModels, CliError> {
    let forest = rf
        .or(config.rf_model.as_deref())
        .map(|p| Forest::load(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display()))))
        .transpose()?;
    let fit_model = fit
        .or(config.fit_model.as_deref())
        .map(|p| {
            MlpModel::load(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))
        })
        .transpose()?;
    Ok((forest, fit_model))
}

pub fn cmd_analyze(mut config: AppConfig, args: AnalyzeArgs) -> Result<(), CliError> {
    if args.no_search {
        config.pipeline.knowledge.enabled = false;
    }
    let startup = load_startup(&args.input, config.pipeline.max_description_chars)?;
    let gateway = config.gateway()?;
    let search = config.search();
    let (forest, fit_model) =
        load_models(&config, args.rf_model.as_deref(), args.fit_model.as_deref())?;
    let mut pipeline = Pipeline::new(&gateway, config.pipeline.clone());
    if let Some(s) = search.as_deref() {
        pipeline = pipeline.with_search(s);
    }
    if let Some(f) = &forest {
        pipeline = pipeline.with_forest(f);
    }
    if let Some(m) = &fit_model {
        pipeline = pipeline.with_fit_model(m);
    }
    let run = run_pipeline(&startup, &pipeline)?;
    write_run_artifacts(&run, &config.out_dir)
        .map_err(|e| CliError::Validation(format!("{}: {e}", config.out_dir.display())))?;
    print!("{}", summary_table(&run.report));
    println!("artifacts: {}", config.out_dir.display());
    Ok(())
}

fn summary_table(r: &crate::domain::FinalReport) -> String {
    let rows = [
        ("startup", r.name.clone()),
        ("recommendation", r.recommendation.to_string()),
        ("overall score", format!("{}/10", r.overall_score)),
        ("confidence", format!("{:.2}", r.confidence.get())),
        (
            "market viability",
            format!("{}/10", r.market_viability_score),
        ),
        (
            "product potential",
            format!("{}/10", r.product_viability_score),
        ),
        (
            "founder competency",
            format!("{}/10", r.founder_competency_score),
        ),
        ("founder level", r.segmentation.level.to_string()),
        ("fit score", format!("{:.4}", r.fit_score.get())),
        ("random forest", r.rf_prediction.verdict().to_string()),
        (
            "quant decision",
            format!(
                "{} ({:.2})",
                r.quant_decision.outcome.verdict(),
                r.quant_decision.probability.get()
            ),
        ),
        (
            "degraded",
            if r.degraded.is_empty() {
                "-".to_string()
            } else {
                r.degraded.join(", ")
            },
        ),
    ];
    let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::new();
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<w$}  {v}");
    }
    s
}

#[derive(Debug, Deserialize)]
struct RfRow {
    features: CategoricalFeatures,
    label: Outcome,
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let text = read(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(line)
            .map_err(|e| CliError::Validation(format!("{}:{}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    Ok(rows)
}

pub fn cmd_train_rf(mut config: AppConfig, args: TrainRfArgs) -> Result<(), CliError> {
    if let Some(n) = args.n_trees {
        config.forest.n_trees = n;
    }
    if args.max_depth.is_some() {
        config.forest.max_depth = args.max_depth;
    }
    if !(0.0..1.0).contains(&args.test_fraction) {
        return Err(CliError::Validation(format!(
            "test fraction {} not in [0, 1)",
            args.test_fraction
        )));
    }
    let rows: Vec<RfRow> = parse_jsonl(&args.data)?;
    let x: Vec<_> = rows
        .iter()
        .map(|r| crate::rf::encode(&r.features))
        .collect();
    let y: Vec<Outcome> = rows.iter().map(|r| r.label).collect();
    let (train_idx, test_idx) = stratified_split(&y, args.test_fraction, config.forest.seed);
    let pick = |idx: &[usize]| {
        (
            idx.iter().map(|&i| x[i]).collect::<Vec<_>>(),
            idx.iter().map(|&i| y[i]).collect::<Vec<_>>(),
        )
    };
    let (xt, yt) = pick(&train_idx);
    let forest: Forest<f64> =
        train_forest_encoded(&xt, &yt, &config.forest).map_err(|e: ForestError| invalid(e))?;

    create_dir(&config.out_dir)?;
    let model_path = config.out_dir.join("model.json");
    forest.save(&model_path).map_err(invalid)?;
    let mut report = format!(
        "train rows: {}\ntest rows: {}\n",
        train_idx.len(),
        test_idx.len()
    );
    if test_idx.is_empty() {
        report.push_str("no held-out rows\n");
    } else {
        let (xv, yv) = pick(&test_idx);
        let pred: Vec<Outcome> = xv
            .iter()
            .map(|v| forest.predict_encoded(v).outcome)
            .collect();
        let cr = classification_report(&yv, &pred).map_err(invalid)?;
        report.push('\n');
        report.push_str(&cr.to_text());
    }
    write(&config.out_dir.join("report.txt"), &report)?;
    print!("{report}");
    println!("model: {}", model_path.display());
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FitRow {
    Vectors {
        startup_vec: Vec<f64>,
        founder_vec: Vec<f64>,
        level: SegmentLevel,
        outcome: Outcome,
    },
    Texts {
        startup_text: String,
        founder_text: String,
        level: SegmentLevel,
        outcome: Outcome,
    },
}

/// Rows checked by `--grad-check`.
const GRAD_CHECK_ROWS: usize = 5;

pub fn cmd_train_fit(mut config: AppConfig, args: TrainFitArgs) -> Result<(), CliError> {
    if let Some(e) = args.epochs {
        config.mlp.epochs = e;
    }
    if let Some(lr) = args.lr {
        config.mlp.lr = lr;
    }
    let dim = args.embedding_dim.unwrap_or(config.pipeline.embedding_dim);
    let rows: Vec<FitRow> = parse_jsonl(&args.data)?;
    let needs_gateway = rows.iter().any(|r| matches!(r, FitRow::Texts { .. }));
    let gateway = if needs_gateway {
        Some(config.gateway()?)
    } else {
        None
    };

    let mut data = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        let (pair, level, outcome) = match row {
            FitRow::Vectors {
                startup_vec,
                founder_vec,
                level,
                outcome,
            } => (
                EmbeddingPair::new(startup_vec, founder_vec)
                    .map_err(|e| CliError::Validation(format!("row {}: {e}", i + 1)))?,
                level,
                outcome,
            ),
            FitRow::Texts {
                startup_text,
                founder_text,
                level,
                outcome,
            } => {
                let gw = gateway.as_ref().expect("gateway built for text rows");
                let pair =
                    embed_pair(gw, &startup_text, &founder_text, dim).map_err(|e| match e {
                        crate::fit::FitError::Gateway(g) => CliError::Provider(g.to_string()),
                        other => CliError::Validation(format!("row {}: {other}", i + 1)),
                    })?;
                (pair, level, outcome)
            }
        };
        let target: f64 = preliminary_fit_score(level, outcome).normalized();
        data.push((build_fit_features(&pair), target));
    }

    let trained = train(&data, &config.mlp).map_err(invalid)?;
    create_dir(&config.out_dir)?;
    let model_path = config.out_dir.join("fit_model.json");
    trained.model.save(&model_path).map_err(invalid)?;
    let loss_path = config.out_dir.join("loss.csv");
    let file = fs::File::create(&loss_path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", loss_path.display())))?;
    write_loss_csv(&trained.trace, file).map_err(invalid)?;

    if let Some(last) = trained.trace.last() {
        match last.val_mse {
            Some(v) => println!(
                "epoch {}: train mse {:.6}, validation mse {v:.6}",
                last.epoch, last.train_mse
            ),
            None => println!("epoch {}: train mse {:.6}", last.epoch, last.train_mse),
        }
    }
    if args.grad_check {
        let mut worst = 0.0f64;
        for (x, t) in data.iter().take(GRAD_CHECK_ROWS) {
            worst = worst.max(gradient_check(&trained.model, x, *t).map_err(invalid)?);
        }
        println!("gradient check: max relative error {worst:.3e}");
    }
    println!("model: {}", model_path.display());
    println!("loss: {}", loss_path.display());
    Ok(())
}

pub fn cmd_evaluate(mut config: AppConfig, args: EvaluateArgs) -> Result<(), CliError> {
    if let Some(m) = args.mode {
        config.eval.mode = match m {
            ModeArg::Baseline => EvalMode::Baseline,
            ModeArg::Ssff => EvalMode::Ssff,
        };
    }
    if let Some(n) = args.n_success {
        config.eval.n_success = n;
    }
    if let Some(n) = args.n_failure {
        config.eval.n_failure = n;
    }
    if let Some(p) = args.parallelism {
        config.eval.parallelism = p;
    }
    if args.no_search {
        config.pipeline.knowledge.enabled = false;
    }
    let entries = load_dataset(&args.dataset)?;
    let sample = stratified_sample(&entries, &config.eval)?;
    let gateway = config.gateway()?;
    let run = match config.eval.mode {
        EvalMode::Baseline => run_baseline(
            &sample,
            &gateway,
            &config.eval.model_id,
            config.eval.parallelism,
        )?,
        EvalMode::Ssff => {
            let search = config.search();
            let (forest, fit_model) = load_models(&config, None, None)?;
            let mut pipeline = Pipeline::new(&gateway, config.pipeline.clone());
            if let Some(s) = search.as_deref() {
                pipeline = pipeline.with_search(s);
            }
            if let Some(f) = &forest {
                pipeline = pipeline.with_forest(f);
            }
            if let Some(m) = &fit_model {
                pipeline = pipeline.with_fit_model(m);
            }
            run_ssff(&sample, &pipeline, config.eval.parallelism)
        }
    };
    let metrics = emit_results(&run, &config.out_dir)?;
    println!(
        "{} on {}: {} evaluated, {} flagged, {} failed",
        metrics.mode, metrics.model_id, metrics.n_evaluated, metrics.n_flagged, metrics.n_failed
    );
    let table = read(&config.out_dir.join("table.txt"))?;
    print!("{table}");
    println!("results: {}", config.out_dir.display());
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SegmentInput {
    Profile(FounderProfile),
    #[allow(dead_code)]
    Startup {
        founders: serde_json::Value,
    },
}

pub fn cmd_segment(config: AppConfig, args: SegmentArgs) -> Result<(), CliError> {
    let text = read(&args.input)?;
    let model = config
        .pipeline
        .models
        .for_stage(Stage::Segmentation)
        .to_string();
    let founders = match serde_json::from_str::<SegmentInput>(&text) {
        Ok(SegmentInput::Profile(p)) => vec![p],
        Ok(SegmentInput::Startup { .. }) => eval::parse_startup(&text).map_err(invalid)?.founders,
        Err(_) if text.trim_start().starts_with('{') => {
            return Err(CliError::Validation(format!(
                "{}: not a profile or startup document",
                args.input.display()
            )))
        }
        Err(_) => vec![FounderProfile::new(text.trim())],
    };
    if founders.iter().any(|f| f.raw_text.trim().is_empty()) {
        return Err(CliError::Validation(format!(
            "{}: empty founder profile",
            args.input.display()
        )));
    }
    let gateway = config.gateway()?;
    if let [single] = founders.as_slice() {
        println!("{}", segment_founder(single, &gateway, &model)?.level);
        return Ok(());
    }
    let (level, results) = segment_team(&founders, &gateway, &model)?;
    for (i, r) in results.iter().enumerate() {
        println!("founder {}: {}", i + 1, r.level);
    }
    println!("{level}");
    Ok(())
}

pub fn cmd_research(config: AppConfig, args: ResearchArgs) -> Result<(), CliError> {
    let startup = load_startup(&args.input, config.pipeline.max_description_chars)?;
    let provider = config.search().ok_or_else(|| {
        CliError::Validation("web search is disabled or SEARCH_API_KEY is not set".into())
    })?;
    let gateway = config.gateway()?;
    let model = config.pipeline.models.for_stage(Stage::Research);
    let r = research(
        &startup.description,
        &startup.startup_info(),
        &gateway,
        provider.as_ref(),
        &config.pipeline.knowledge,
        model,
    )?;
    println!("keywords: {}", r.keywords.joined());
    println!();
    println!("{}", r.report.text.trim());
    println!();
    println!("citations:");
    for (i, url) in r.report.citations.iter().enumerate() {
        println!("[{}] {url}", i + 1);
    }
    Ok(())
}
