//! Group statistics, Welch's t-test and over-prediction bias.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use super::EvalError;
use crate::domain::Outcome;
use crate::rf::ConfusionMatrix;
use crate::scalar::{mean, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Two-sided Welch test of equal means.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::DegenerateInput(format!(
            "need at least 2 values per group, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(EvalError::DegenerateInput("non-finite value".into()));
    }
    let va = sample_variance(a) / a.len() as f64;
    let vb = sample_variance(b) / b.len() as f64;
    if va + vb == 0.0 {
        return Err(EvalError::DegenerateInput(
            "both groups are constant".into(),
        ));
    }
    let t = (mean(a) - mean(b)) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    Ok(WelchTest {
        t,
        df,
        p: student_t_two_sided(t, df),
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    /// `None` for an empty group.
    pub mean: Option<f64>,
    /// Sample variance; `None` below two values.
    pub variance: Option<f64>,
}

impl GroupSummary {
    pub fn of(xs: &[f64]) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        Self {
            n: xs.len(),
            mean: finite(mean(xs)),
            variance: finite(sample_variance(xs)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub metric: String,
    /// What splits the groups, e.g. `label` or `recommendation`.
    pub grouping: String,
    pub group_a: String,
    pub group_b: String,
    pub a: GroupSummary,
    pub b: GroupSummary,
    /// `None` when the test is undefined for these groups.
    pub test: Option<WelchTest>,
}

pub fn group_stats(
    metric: &str,
    grouping: &str,
    names: (&str, &str),
    a: &[f64],
    b: &[f64],
) -> GroupStats {
    GroupStats {
        metric: metric.to_string(),
        grouping: grouping.to_string(),
        group_a: names.0.to_string(),
        group_b: names.1.to_string(),
        a: GroupSummary::of(a),
        b: GroupSummary::of(b),
        test: welch_t_test(a, b).ok(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasMetrics {
    pub false_positive_rate: f64,
    pub predicted_positive_fraction: f64,
    /// Predicted positive fraction minus true positive fraction.
    pub over_prediction_index: f64,
}

pub fn bias_metrics(y_true: &[Outcome], y_pred: &[Outcome]) -> Result<BiasMetrics, EvalError> {
    let m = ConfusionMatrix::from_labels(y_true, y_pred)?;
    let n = m.total() as f64;
    let negatives = m.fp() + m.tn();
    let fpr = if negatives == 0 {
        0.0
    } else {
        m.fp() as f64 / negatives as f64
    };
    let ppf = (m.tp() + m.fp()) as f64 / n;
    let tpf = (m.tp() + m.fn_()) as f64 / n;
    Ok(BiasMetrics {
        false_positive_rate: fpr,
        predicted_positive_fraction: ppf,
        over_prediction_index: ppf - tpf,
    })
}

/// The integer confusion matrix consistent with rounded (recall, precision,
/// accuracy) on `n` items with `positives` true positives, if one exists.
/// Each recomputed rate must match its input to within `tol`.
pub fn confusion_from_rates(
    n: usize,
    positives: usize,
    recall: f64,
    precision: f64,
    accuracy: f64,
    tol: f64,
) -> Option<ConfusionMatrix> {
    let negatives = n.checked_sub(positives)?;
    let mut found = None;
    for tp in 0..=positives {
        for fp in 0..=negatives {
            let (fn_, tn) = (positives - tp, negatives - fp);
            let r = tp as f64 / positives.max(1) as f64;
            let p = if tp + fp == 0 {
                0.0
            } else {
                tp as f64 / (tp + fp) as f64
            };
            let a = (tp + tn) as f64 / n as f64;
            if (r - recall).abs() <= tol
                && (p - precision).abs() <= tol
                && (a - accuracy).abs() <= tol
            {
                if found.is_some() {
                    return None;
                }
                found = Some(ConfusionMatrix([[tn, fp], [fn_, tp]]));
            }
        }
    }
    found
}
