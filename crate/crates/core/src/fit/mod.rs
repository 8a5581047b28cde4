//! Founder-idea fit: the closed-form score, embedding features, regression
//! diagnostics and an MLP regressor.

pub mod mlp;
pub mod ols;

use num_traits::{FromPrimitive, Num};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Outcome, SegmentLevel};
use crate::llm::{EmbeddingRequest, Gateway, GatewayError};
use crate::scalar::{dot, norm, Real};

pub use mlp::{LossRecord, MlpError, MlpModel, TrainConfig};
pub use ols::{ols_and_pearson, OlsDiagnostics};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroVector,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Model(#[from] MlpError),
}

/// Preliminary fit score in `-5..=5` (never 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FitScore {
    pub pfs: i8,
}

impl FitScore {
    /// `pfs / 5` in any numeric type that can represent it; exact for rationals.
    pub fn normalized<T: Num + FromPrimitive>(self) -> T {
        T::from_i8(self.pfs).expect("small integer") / T::from_i8(5).expect("small integer")
    }
}

/// `(6 - F) * O - F * (1 - O)`.
pub fn preliminary_fit_score(level: SegmentLevel, outcome: Outcome) -> FitScore {
    let f = level.get() as i8;
    let o = outcome.as_u8() as i8;
    FitScore {
        pfs: (6 - f) * o - f * (1 - o),
    }
}

pub fn cosine_similarity<T: Real>(a: &[T], b: &[T]) -> Result<T, FitError> {
    if a.len() != b.len() {
        return Err(FitError::LengthMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == T::zero() || nb == T::zero() {
        return Err(FitError::ZeroVector);
    }
    Ok((dot(a, b) / (na * nb)).max(-T::one()).min(T::one()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPair<T> {
    pub startup_vec: Vec<T>,
    pub founder_vec: Vec<T>,
    pub cosine: T,
}

impl<T: Real> EmbeddingPair<T> {
    pub fn new(startup_vec: Vec<T>, founder_vec: Vec<T>) -> Result<Self, FitError> {
        let cosine = cosine_similarity(&startup_vec, &founder_vec)?;
        Ok(Self {
            startup_vec,
            founder_vec,
            cosine,
        })
    }

    pub fn dim(&self) -> usize {
        self.startup_vec.len()
    }
}

/// `[startup ‖ founder ‖ cosine]`, length `2d + 1`.
pub fn build_fit_features<T: Real>(pair: &EmbeddingPair<T>) -> Vec<T> {
    let mut v = Vec::with_capacity(2 * pair.dim() + 1);
    v.extend_from_slice(&pair.startup_vec);
    v.extend_from_slice(&pair.founder_vec);
    v.push(pair.cosine);
    v
}

/// Embed both texts at dimension `dim`, one request each, in parallel.
pub fn embed_pair(
    gateway: &Gateway,
    startup_text: &str,
    founder_text: &str,
    dim: usize,
) -> Result<EmbeddingPair<f64>, FitError> {
    let (s, f) = std::thread::scope(|scope| {
        let s = scope.spawn(|| gateway.embed(&EmbeddingRequest::new(startup_text, dim)));
        let f = gateway.embed(&EmbeddingRequest::new(founder_text, dim));
        (s.join().expect("embedding thread"), f)
    });
    EmbeddingPair::new(s?, f?)
}

/// Model output for an embedding pair, clamped to `[-1, 1]`.
pub fn predict_fit_from_pair<T: Real>(
    model: &MlpModel<T>,
    pair: &EmbeddingPair<T>,
) -> Result<T, FitError> {
    let y = model.predict(&build_fit_features(pair))?;
    Ok(y.max(-T::one()).min(T::one()))
}

pub fn predict_fit<T: Real>(
    model: &MlpModel<T>,
    startup_text: &str,
    founder_text: &str,
    gateway: &Gateway,
) -> Result<T, FitError> {
    let dim = (model.input_size() - 1) / 2;
    let pair = embed_pair(gateway, startup_text, founder_text, dim)?;
    let cast = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
    let pair = EmbeddingPair::new(cast(pair.startup_vec), cast(pair.founder_vec))?;
    predict_fit_from_pair(model, &pair)
}
