//! Result files: `metrics.json`, `predictions.csv`, `dist_*.csv`, `table.txt`.
//!
//! Everything written here is a pure function of the run, sorted by entry id,
//! with no timestamps, so identical runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{bias_metrics, group_stats, BiasMetrics, GroupStats};
use super::{EntryFailure, EntryReport, EvalError, EvalRun};
use crate::domain::{Outcome, Recommendation};
use crate::rf::{classification_report, ClassificationReport};

pub const PREDICTIONS_HEADER: &str =
    "id,label,predicted,probability,flagged,recommendation,overall_score,confidence,segmentation,fit_score";
pub const DIST_HEADER: &str = "id,value,label,recommendation";

/// A named per-report metric.
pub type Metric = (&'static str, fn(&EntryReport) -> f64);

/// Distribution files and the report field each one reads.
pub const DISTRIBUTIONS: [Metric; 4] = [
    ("overall_score", |e| e.report.overall_score.get()),
    ("confidence", |e| e.report.confidence.get()),
    ("founder_competency", |e| {
        e.report.founder_competency_score.get()
    }),
    ("fit", |e| e.report.fit_score.get()),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub mode: String,
    pub model_id: String,
    pub n_evaluated: usize,
    pub n_flagged: usize,
    pub n_failed: usize,
    /// `None` when no entry produced a prediction.
    pub classification: Option<ClassificationReport>,
    pub bias: Option<BiasMetrics>,
    pub group_tests: Vec<GroupStats>,
    pub failures: Vec<EntryFailure>,
}

impl MetricsFile {
    pub fn from_run(run: &EvalRun) -> Self {
        let (truth, pred) = run.labels();
        MetricsFile {
            mode: run.mode.label().to_string(),
            model_id: run.model_id.clone(),
            n_evaluated: run.predictions.len(),
            n_flagged: run.predictions.iter().filter(|p| p.flagged).count(),
            n_failed: run.failures.len(),
            classification: classification_report(&truth, &pred).ok(),
            bias: bias_metrics(&truth, &pred).ok(),
            group_tests: group_tests(&run.reports),
            failures: run.failures.clone(),
        }
    }
}

/// Welch tests of each report metric, split by true label and by recommendation.
pub fn group_tests(reports: &[EntryReport]) -> Vec<GroupStats> {
    if reports.is_empty() {
        return Vec::new();
    }
    let mut metrics: Vec<Metric> = DISTRIBUTIONS.to_vec();
    metrics.push(("quant_probability", |e| {
        e.report.quant_decision.probability.get()
    }));
    let mut out = Vec::new();
    for (name, get) in metrics {
        let split = |pred: &dyn Fn(&EntryReport) -> bool| -> (Vec<f64>, Vec<f64>) {
            let a = reports.iter().filter(|e| pred(e)).map(get).collect();
            let b = reports.iter().filter(|e| !pred(e)).map(get).collect();
            (a, b)
        };
        let (a, b) = split(&|e| e.label == Outcome::Success);
        out.push(group_stats(name, "label", ("success", "failure"), &a, &b));
        let (a, b) = split(&|e| e.report.recommendation == Recommendation::Invest);
        out.push(group_stats(
            name,
            "recommendation",
            ("invest", "hold"),
            &a,
            &b,
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub model: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ComparisonRow {
    pub fn from_run(run: &EvalRun, report: &ClassificationReport) -> Self {
        Self {
            method: run.mode.label().to_string(),
            model: run.model_id.clone(),
            accuracy: report.accuracy,
            precision: report.success.precision,
            recall: report.success.recall,
            f1: report.success.f1,
        }
    }
}

/// Aligned text table, one row per (method, model). Rates are percentages.
pub fn render_comparison_table(rows: &[ComparisonRow]) -> String {
    let headers = ["Method", "Model", "Accuracy", "Precision", "Recall", "F1"];
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            let pct = |v: f64| format!("{:.2}%", v * 100.0);
            [
                r.method.clone(),
                r.model.clone(),
                pct(r.accuracy),
                pct(r.precision),
                pct(r.recall),
                pct(r.f1),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..headers.len())
        .map(|i| {
            cells
                .iter()
                .map(|c| c[i].len())
                .chain([headers[i].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cols: &[&str]| {
        cols.iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i < 2 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let mut s = String::new();
    let _ = writeln!(s, "{}", line(&headers));
    let _ = writeln!(
        s,
        "{}",
        widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("-+-")
    );
    for c in &cells {
        let refs: Vec<&str> = c.iter().map(String::as_str).collect();
        let _ = writeln!(s, "{}", line(&refs));
    }
    s
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), EvalError> {
    fs::write(path, contents).map_err(|e| EvalError::io(path, e))
}

fn csv_text(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header.split(',')).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write every result file for `run` into `out_dir`, creating it if needed.
pub fn emit_results(run: &EvalRun, out_dir: &Path) -> Result<MetricsFile, EvalError> {
    fs::create_dir_all(out_dir).map_err(|e| EvalError::io(out_dir, e))?;
    let metrics = MetricsFile::from_run(run);
    let json = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    write(&out_dir.join("metrics.json"), json + "\n")?;

    let report_of = |id: &str| run.reports.iter().find(|r| r.id == id).map(|r| &r.report);
    let rows = run.predictions.iter().map(|p| {
        let r = report_of(&p.id);
        vec![
            p.id.clone(),
            p.label.as_u8().to_string(),
            p.predicted.as_u8().to_string(),
            opt(p.probability),
            p.flagged.to_string(),
            opt(r.map(|r| r.recommendation)),
            opt(r.map(|r| r.overall_score.get())),
            opt(r.map(|r| r.confidence.get())),
            opt(r.map(|r| r.segmentation.level)),
            opt(r.map(|r| r.fit_score.get())),
        ]
    });
    write(
        &out_dir.join("predictions.csv"),
        csv_text(PREDICTIONS_HEADER, rows),
    )?;

    for (name, get) in DISTRIBUTIONS {
        let rows = run.reports.iter().map(|e| {
            vec![
                e.id.clone(),
                get(e).to_string(),
                e.label.as_u8().to_string(),
                e.report.recommendation.to_string(),
            ]
        });
        write(
            &out_dir.join(format!("dist_{name}.csv")),
            csv_text(DIST_HEADER, rows),
        )?;
    }

    let mut table = String::new();
    if let Some(report) = &metrics.classification {
        table.push_str(&render_comparison_table(&[ComparisonRow::from_run(
            run, report,
        )]));
        table.push('\n');
        table.push_str(&report.to_text());
    } else {
        table.push_str("no predictions\n");
    }
    write(&out_dir.join("table.txt"), table)?;
    Ok(metrics)
}
