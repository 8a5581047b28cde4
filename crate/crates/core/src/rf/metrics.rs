//! Binary classification report: per-class precision/recall/F1, accuracy,
//! macro and support-weighted averages, confusion matrix.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::forest::Predictor;
use crate::domain::Outcome;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{truth} labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("no samples")]
    Empty,
    #[error("expected a 1:4 positive:negative split, got {positives}:{negatives}")]
    RatioViolated { positives: usize, negatives: usize },
}

/// Rows are the actual class, columns the predicted class, index 0 = failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[usize; 2]; 2]);

impl ConfusionMatrix {
    pub fn from_labels(y_true: &[Outcome], y_pred: &[Outcome]) -> Result<Self, MetricsError> {
        if y_true.len() != y_pred.len() {
            return Err(MetricsError::LengthMismatch {
                truth: y_true.len(),
                pred: y_pred.len(),
            });
        }
        let mut m = [[0usize; 2]; 2];
        for (t, p) in y_true.iter().zip(y_pred) {
            m[usize::from(t.as_u8())][usize::from(p.as_u8())] += 1;
        }
        Ok(Self(m))
    }

    pub fn tn(&self) -> usize {
        self.0[0][0]
    }
    pub fn fp(&self) -> usize {
        self.0[0][1]
    }
    pub fn fn_(&self) -> usize {
        self.0[1][0]
    }
    pub fn tp(&self) -> usize {
        self.0[1][1]
    }

    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub failure: ClassMetrics,
    pub success: ClassMetrics,
    pub accuracy: f64,
    pub macro_avg: ClassMetrics,
    pub weighted_avg: ClassMetrics,
    pub confusion_matrix: ConfusionMatrix,
}

/// `num / den`, with 0 when the denominator is 0.
fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl ClassificationReport {
    pub fn from_confusion(m: ConfusionMatrix) -> Result<Self, MetricsError> {
        let n = m.total();
        if n == 0 {
            return Err(MetricsError::Empty);
        }
        let class = |c: usize| {
            let tp = m.0[c][c];
            let predicted = m.0[0][c] + m.0[1][c];
            let actual = m.0[c][0] + m.0[c][1];
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, actual);
            ClassMetrics {
                precision,
                recall,
                f1: harmonic(precision, recall),
                support: actual,
            }
        };
        let failure = class(0);
        let success = class(1);
        let avg = |w0: f64, w1: f64| ClassMetrics {
            precision: w0 * failure.precision + w1 * success.precision,
            recall: w0 * failure.recall + w1 * success.recall,
            f1: w0 * failure.f1 + w1 * success.f1,
            support: n,
        };
        Ok(Self {
            failure,
            success,
            accuracy: ratio(m.tn() + m.tp(), n),
            macro_avg: avg(0.5, 0.5),
            weighted_avg: avg(ratio(failure.support, n), ratio(success.support, n)),
            confusion_matrix: m,
        })
    }

    /// Plain-text table in the familiar precision/recall/f1/support layout.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>14} {:>9} {:>9} {:>9} {:>9}",
            "", "precision", "recall", "f1-score", "support"
        );
        let row = |s: &mut String, name: &str, c: &ClassMetrics| {
            let _ = writeln!(
                s,
                "{:>14} {:>9.2} {:>9.2} {:>9.2} {:>9}",
                name, c.precision, c.recall, c.f1, c.support
            );
        };
        row(&mut s, "0", &self.failure);
        row(&mut s, "1", &self.success);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:>14} {:>9} {:>9} {:>9.2} {:>9}",
            "accuracy", "", "", self.accuracy, self.macro_avg.support
        );
        row(&mut s, "macro avg", &self.macro_avg);
        row(&mut s, "weighted avg", &self.weighted_avg);
        let m = &self.confusion_matrix.0;
        let _ = writeln!(s, "\nconfusion matrix (rows = actual, cols = predicted)");
        let _ = writeln!(s, "{:>14} {:>9} {:>9}", "", "0", "1");
        let _ = writeln!(s, "{:>14} {:>9} {:>9}", "0", m[0][0], m[0][1]);
        let _ = writeln!(s, "{:>14} {:>9} {:>9}", "1", m[1][0], m[1][1]);
        s
    }
}

pub fn classification_report(
    y_true: &[Outcome],
    y_pred: &[Outcome],
) -> Result<ClassificationReport, MetricsError> {
    ClassificationReport::from_confusion(ConfusionMatrix::from_labels(y_true, y_pred)?)
}

/// Evaluate `predictor` on a test set that must hold a 1:4 positive:negative mix
/// (positives = round(n / 5)).
pub fn skewed_eval<T, P: Predictor<T> + ?Sized>(
    predictor: &P,
    rows: &[Vec<T>],
    y_true: &[Outcome],
) -> Result<ClassificationReport, MetricsError> {
    if rows.len() != y_true.len() {
        return Err(MetricsError::LengthMismatch {
            truth: y_true.len(),
            pred: rows.len(),
        });
    }
    let positives = y_true.iter().filter(|o| o.is_success()).count();
    let negatives = y_true.len() - positives;
    if positives != (y_true.len() as f64 / 5.0).round() as usize {
        return Err(MetricsError::RatioViolated {
            positives,
            negatives,
        });
    }
    let y_pred: Vec<Outcome> = rows.iter().map(|r| predictor.predict_outcome(r)).collect();
    classification_report(y_true, &y_pred)
}

/// Reference figures reported for the forest on a 1:4 split: (accuracy, F1).
pub const SKEWED_REFERENCE: (f64, f64) = (0.8000, 0.5455);
