//! Binary CART classification tree with Gini impurity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Outcome;
use crate::scalar::Real;

/// Improvement below this is not a split.
pub(crate) const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined at each node; clamped to the feature count.
    pub features_per_split: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node<T> {
    Leaf {
        success: usize,
        failure: usize,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: T,
        left: Box<Node<T>>,
        right: Box<Node<T>>,
    },
}

impl<T: Real> Node<T> {
    fn leaf(y: &[Outcome], idx: &[usize]) -> Self {
        let success = idx.iter().filter(|&&i| y[i].is_success()).count();
        Node::Leaf {
            success,
            failure: idx.len() - success,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }
}

/// Gini impurity of a node holding `pos` successes out of `n`.
pub fn gini<T: Real>(pos: usize, n: usize) -> T {
    if n == 0 {
        return T::zero();
    }
    let p = T::from_usize_lossy(pos) / T::from_usize_lossy(n);
    T::one() - p * p - (T::one() - p) * (T::one() - p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<T> {
    pub root: Node<T>,
    pub n_features: usize,
}

struct BestSplit<T> {
    feature: usize,
    threshold: T,
    impurity: T,
}

impl<T: Real> DecisionTree<T> {
    /// Grow a tree on the rows listed in `idx` (duplicates allowed, as produced
    /// by bootstrap resampling).
    pub fn fit<R: Rng + ?Sized>(
        x: &[Vec<T>],
        y: &[Outcome],
        idx: &[usize],
        config: &TreeConfig,
        rng: &mut R,
    ) -> Self {
        let n_features = x.first().map_or(0, Vec::len);
        let mut idx = idx.to_vec();
        let root = grow(x, y, &mut idx, 0, config, n_features, rng);
        Self { root, n_features }
    }

    /// Class votes at the leaf reached by `row`: `(success, failure)`.
    pub fn leaf_counts(&self, row: &[T]) -> (usize, usize) {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { success, failure } => return (*success, *failure),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    /// Majority class at the leaf; ties resolve to failure.
    pub fn predict(&self, row: &[T]) -> Outcome {
        let (s, f) = self.leaf_counts(row);
        Outcome::from_bool(s > f)
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

fn sample_features<R: Rng + ?Sized>(n_features: usize, k: usize, rng: &mut R) -> Vec<usize> {
    let k = k.clamp(1, n_features.max(1));
    if k >= n_features {
        return (0..n_features).collect();
    }
    let mut all: Vec<usize> = (0..n_features).collect();
    for i in 0..k {
        let j = rng.random_range(i..n_features);
        all.swap(i, j);
    }
    let mut chosen = all[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

fn best_split<T: Real>(
    x: &[Vec<T>],
    y: &[Outcome],
    idx: &mut [usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<BestSplit<T>> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| y[i].is_success()).count();
    let nf = T::from_usize_lossy(n);
    let mut best: Option<BestSplit<T>> = None;
    for &f in features {
        idx.sort_by(|&a, &b| x[a][f].partial_cmp(&x[b][f]).expect("finite features"));
        let mut left_pos = 0usize;
        for k in 1..n {
            if y[idx[k - 1]].is_success() {
                left_pos += 1;
            }
            let (lo, hi) = (x[idx[k - 1]][f], x[idx[k]][f]);
            if lo == hi || k < min_leaf || n - k < min_leaf {
                continue;
            }
            let right_pos = total_pos - left_pos;
            let imp = (T::from_usize_lossy(k) * gini::<T>(left_pos, k)
                + T::from_usize_lossy(n - k) * gini::<T>(right_pos, n - k))
                / nf;
            let better = match &best {
                None => true,
                Some(b) => imp < b.impurity - T::lit(MIN_GAIN),
            };
            if better {
                best = Some(BestSplit {
                    feature: f,
                    threshold: (lo + hi) / T::lit(2.0),
                    impurity: imp,
                });
            }
        }
    }
    best
}

fn grow<T: Real, R: Rng + ?Sized>(
    x: &[Vec<T>],
    y: &[Outcome],
    idx: &mut [usize],
    depth: usize,
    config: &TreeConfig,
    n_features: usize,
    rng: &mut R,
) -> Node<T> {
    let n = idx.len();
    let pos = idx.iter().filter(|&&i| y[i].is_success()).count();
    let min_leaf = config.min_samples_leaf.max(1);
    let stop = pos == 0
        || pos == n
        || config.max_depth.is_some_and(|d| depth >= d)
        || n < 2 * min_leaf
        || n_features == 0;
    if stop {
        return Node::leaf(y, idx);
    }
    let features = sample_features(n_features, config.features_per_split, rng);
    let parent = gini::<T>(pos, n);
    match best_split(x, y, idx, &features, min_leaf) {
        Some(split) if split.impurity < parent - T::lit(MIN_GAIN) => {
            let (mut left, mut right): (Vec<usize>, Vec<usize>) = idx
                .iter()
                .partition(|&&i| x[i][split.feature] <= split.threshold);
            let l = grow(x, y, &mut left, depth + 1, config, n_features, rng);
            let r = grow(x, y, &mut right, depth + 1, config, n_features, rng);
            Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                left: Box::new(l),
                right: Box::new(r),
            }
        }
        _ => Node::leaf(y, idx),
    }
}
