//! Simple linear regression with Pearson correlation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{mean, Real};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("degenerate regression input: {0}")]
pub struct DegenerateInput(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsDiagnostics<T> {
    pub slope: T,
    pub intercept: T,
    pub pearson_r: T,
    /// `1 - SS_res / SS_tot` from the fitted residuals.
    pub r_squared: T,
    pub n: usize,
}

/// Least-squares line `y = slope * x + intercept` and its fit statistics.
///
/// Needs at least three points, non-constant `xs` and non-constant `ys`.
pub fn ols_and_pearson<T: Real>(xs: &[T], ys: &[T]) -> Result<OlsDiagnostics<T>, DegenerateInput> {
    if xs.len() != ys.len() {
        return Err(DegenerateInput(format!(
            "{} xs vs {} ys",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(DegenerateInput(format!(
            "{} points, need at least 3",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(DegenerateInput("non-finite value".into()));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
        sxy = sxy + dx * dy;
    }
    if sxx == T::zero() {
        return Err(DegenerateInput("xs are constant".into()));
    }
    if syy == T::zero() {
        return Err(DegenerateInput("ys are constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let pearson_r = (sxy / (sxx.sqrt() * syy.sqrt()))
        .max(-T::one())
        .min(T::one());
    let ss_res = xs.iter().zip(ys).fold(T::zero(), |acc, (&x, &y)| {
        let e = y - (slope * x + intercept);
        acc + e * e
    });
    let r_squared = (T::one() - ss_res / syy).max(T::zero()).min(T::one());
    Ok(OlsDiagnostics {
        slope,
        intercept,
        pearson_r,
        r_squared,
        n: xs.len(),
    })
}
