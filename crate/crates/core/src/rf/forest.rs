//! Bagged ensemble of CART trees.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::categories::{EncodedVector, N_CATEGORIES};
use super::tree::{DecisionTree, TreeConfig};
use crate::domain::Outcome;
use crate::scalar::Real;

pub const FOREST_FORMAT: &str = "ssff-random-forest";
pub const FOREST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ForestError {
    #[error("training data is empty")]
    EmptyData,
    #[error("training data contains a single class")]
    SingleClass,
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRows {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite feature value in row {0}")]
    NonFinite(usize),
    #[error("invalid forest config: {0}")]
    InvalidConfig(String),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// `None` means `ceil(sqrt(n_features))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            features_per_split: None,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidConfig(
                "n_trees must be positive".into(),
            ));
        }
        if self.min_samples_leaf == 0 {
            return Err(ForestError::InvalidConfig(
                "min_samples_leaf must be positive".into(),
            ));
        }
        if self.features_per_split == Some(0) {
            return Err(ForestError::InvalidConfig(
                "features_per_split must be positive".into(),
            ));
        }
        if self.max_depth == Some(0) {
            return Err(ForestError::InvalidConfig(
                "max_depth must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn resolved_features_per_split(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestPrediction<T> {
    pub outcome: Outcome,
    /// Share of trees voting for success.
    pub vote_fraction: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
pub struct Forest<T> {
    pub format: String,
    pub version: u32,
    pub config: ForestConfig,
    pub n_features: usize,
    pub trees: Vec<DecisionTree<T>>,
}

/// Anything that turns a feature row into a class.
pub trait Predictor<T> {
    fn predict_outcome(&self, row: &[T]) -> Outcome;
}

impl<T, F: Fn(&[T]) -> Outcome> Predictor<T> for F {
    fn predict_outcome(&self, row: &[T]) -> Outcome {
        self(row)
    }
}

fn check_data<T: Real>(x: &[Vec<T>], y: &[Outcome]) -> Result<usize, ForestError> {
    if x.is_empty() || y.is_empty() {
        return Err(ForestError::EmptyData);
    }
    if x.len() != y.len() {
        return Err(ForestError::LengthMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    let d = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(ForestError::RaggedRows {
                row: i,
                got: row.len(),
                expected: d,
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(ForestError::NonFinite(i));
        }
    }
    let pos = y.iter().filter(|o| o.is_success()).count();
    if pos == 0 || pos == y.len() {
        return Err(ForestError::SingleClass);
    }
    Ok(d)
}

/// Train `config.n_trees` trees. Tree `t` draws from ChaCha stream `t` of the
/// configured seed, so results do not depend on thread scheduling.
pub fn train_forest<T: Real>(
    x: &[Vec<T>],
    y: &[Outcome],
    config: &ForestConfig,
) -> Result<Forest<T>, ForestError> {
    config.validate()?;
    let n_features = check_data(x, y)?;
    let tree_config = TreeConfig {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        features_per_split: config.resolved_features_per_split(n_features),
    };
    let n = x.len();
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let idx: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            DecisionTree::fit(x, y, &idx, &tree_config, &mut rng)
        })
        .collect();
    Ok(Forest {
        format: FOREST_FORMAT.to_string(),
        version: FOREST_VERSION,
        config: config.clone(),
        n_features,
        trees,
    })
}

/// Convenience wrapper for the categorical feature vectors.
pub fn train_forest_encoded<T: Real>(
    x: &[EncodedVector],
    y: &[Outcome],
    config: &ForestConfig,
) -> Result<Forest<T>, ForestError> {
    let rows: Vec<Vec<T>> = x.iter().map(EncodedVector::as_reals).collect();
    train_forest(&rows, y, config)
}

impl<T: Real> Forest<T> {
    /// Majority vote; an exact tie is a failure.
    pub fn predict(&self, row: &[T]) -> ForestPrediction<T> {
        let votes = self
            .trees
            .iter()
            .filter(|t| t.predict(row).is_success())
            .count();
        let n = self.trees.len();
        ForestPrediction {
            outcome: Outcome::from_bool(2 * votes > n),
            vote_fraction: T::from_usize_lossy(votes) / T::from_usize_lossy(n.max(1)),
        }
    }

    pub fn predict_encoded(&self, x: &EncodedVector) -> ForestPrediction<T> {
        self.predict(&x.as_reals::<T>())
    }

    pub fn is_categorical(&self) -> bool {
        self.n_features == N_CATEGORIES
    }

    /// How often each feature is used as a split, summed over trees.
    pub fn split_counts(&self) -> Vec<usize> {
        fn walk<T>(n: &super::tree::Node<T>, counts: &mut [usize]) {
            if let super::tree::Node::Split {
                feature,
                left,
                right,
                ..
            } = n
            {
                counts[*feature] += 1;
                walk(left, counts);
                walk(right, counts);
            }
        }
        let mut counts = vec![0; self.n_features];
        for t in &self.trees {
            walk(&t.root, &mut counts);
        }
        counts
    }
}

impl<T: Real> Predictor<T> for Forest<T> {
    fn predict_outcome(&self, row: &[T]) -> Outcome {
        self.predict(row).outcome
    }
}

impl<T: Real + Serialize + DeserializeOwned> Forest<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ForestError> {
        let f: Self = serde_json::from_str(text).map_err(|e| ForestError::Format(e.to_string()))?;
        if f.format != FOREST_FORMAT || f.version != FOREST_VERSION {
            return Err(ForestError::Format(format!(
                "expected {FOREST_FORMAT} v{FOREST_VERSION}, found {} v{}",
                f.format, f.version
            )));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<(), ForestError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ForestError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Seeded stratified split: each class contributes `round(test_fraction * n_c)`
/// rows to the test side. Returns `(train, test)` index lists.
pub fn stratified_split(y: &[Outcome], test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [Outcome::Failure, Outcome::Success] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}
