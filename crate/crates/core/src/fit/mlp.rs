//! Fully connected regressor: ReLU hidden layers with inverted dropout and a
//! linear scalar output, trained by mini-batch SGD on squared error.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

pub const MLP_FORMAT: &str = "ssff-fit-mlp";
pub const MLP_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("input has {got} features, model expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("training data is empty")]
    EmptyData,
    #[error("target {value} in row {row} is outside [-1, 1]")]
    TargetOutOfRange { row: usize, value: f64 },
    #[error("loss became non-finite in epoch {0}")]
    NonFiniteLoss(usize),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

/// `weights` is row-major `n_out x n_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer<T> {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Real> DenseLayer<T> {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![T::zero(); n_in * n_out],
            biases: vec![T::zero(); n_out],
        }
    }

    fn affine(&self, x: &[T]) -> Vec<T> {
        self.weights
            .chunks_exact(self.n_in)
            .zip(&self.biases)
            .map(|(row, &b)| row.iter().zip(x).fold(b, |acc, (&w, &v)| acc + w * v))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
pub struct MlpModel<T> {
    pub format: String,
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    /// Dropout rate after each hidden layer.
    pub dropout: Vec<f64>,
    pub seed: u64,
    pub layers: Vec<DenseLayer<T>>,
}

/// Per-parameter gradients, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    fn zeros_like(model: &MlpModel<T>) -> Self {
        Self {
            weights: model
                .layers
                .iter()
                .map(|l| vec![T::zero(); l.weights.len()])
                .collect(),
            biases: model
                .layers
                .iter()
                .map(|l| vec![T::zero(); l.biases.len()])
                .collect(),
        }
    }

    fn accumulate(&mut self, other: &Self) {
        for (a, b) in self
            .weights
            .iter_mut()
            .zip(&other.weights)
            .chain(self.biases.iter_mut().zip(&other.biases))
        {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + y;
            }
        }
    }

    pub fn scale(&mut self, factor: T) {
        for v in self
            .weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flatten()
        {
            *v = *v * factor;
        }
    }

    /// All entries, weights of each layer first, then biases.
    pub fn flat(&self) -> Vec<T> {
        self.weights
            .iter()
            .chain(&self.biases)
            .flatten()
            .copied()
            .collect()
    }
}

/// Dropout multipliers for one forward pass: per hidden unit either 0 or
/// `1 / (1 - p)`.
pub type DropoutMasks<T> = Vec<Vec<T>>;

struct ForwardCache<T> {
    /// `acts[0]` is the input; `acts[k]` is the output of layer `k - 1`.
    acts: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
}

fn check_architecture(sizes: &[usize], dropout: &[f64]) -> Result<(), MlpError> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(MlpError::InvalidArchitecture(format!(
            "layer sizes {sizes:?}"
        )));
    }
    if sizes[sizes.len() - 1] != 1 {
        return Err(MlpError::InvalidArchitecture(
            "output layer must have one unit".into(),
        ));
    }
    if dropout.len() != sizes.len() - 2 {
        return Err(MlpError::InvalidArchitecture(format!(
            "{} dropout rates for {} hidden layers",
            dropout.len(),
            sizes.len() - 2
        )));
    }
    if dropout.iter().any(|p| !(0.0..1.0).contains(p)) {
        return Err(MlpError::InvalidArchitecture(format!(
            "dropout rates {dropout:?}"
        )));
    }
    Ok(())
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl<T: Real> MlpModel<T> {
    /// He-uniform weights `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, zero biases.
    pub fn new(sizes: &[usize], dropout: &[f64], seed: u64) -> Result<Self, MlpError> {
        let mut model = Self::zeros(sizes, dropout)?;
        model.seed = seed;
        let mut rng = stream(seed, 0);
        for layer in &mut model.layers {
            let limit = (6.0 / layer.n_in as f64).sqrt();
            for w in &mut layer.weights {
                *w = T::lit(rng.random_range(-limit..limit));
            }
        }
        Ok(model)
    }

    pub fn zeros(sizes: &[usize], dropout: &[f64]) -> Result<Self, MlpError> {
        check_architecture(sizes, dropout)?;
        Ok(Self {
            format: MLP_FORMAT.to_string(),
            version: MLP_VERSION,
            layer_sizes: sizes.to_vec(),
            dropout: dropout.to_vec(),
            seed: 0,
            layers: sizes
                .windows(2)
                .map(|w| DenseLayer::zeros(w[0], w[1]))
                .collect(),
        })
    }

    /// `[2d + 1, 128, 64, 1]` with dropout 0.2 and 0.3.
    pub fn fit_architecture(embedding_dim: usize, seed: u64) -> Result<Self, MlpError> {
        Self::new(&[2 * embedding_dim + 1, 128, 64, 1], &[0.2, 0.3], seed)
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    fn check_input(&self, x: &[T]) -> Result<(), MlpError> {
        if x.len() != self.input_size() {
            return Err(MlpError::ShapeMismatch {
                expected: self.input_size(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Fresh dropout masks for one training pass.
    pub fn draw_masks<R: Rng + ?Sized>(&self, rng: &mut R) -> DropoutMasks<T> {
        self.dropout
            .iter()
            .zip(&self.layer_sizes[1..])
            .map(|(&p, &n)| {
                let keep = T::lit(1.0 / (1.0 - p));
                (0..n)
                    .map(|_| {
                        if rng.random_bool(1.0 - p) {
                            keep
                        } else {
                            T::zero()
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn forward_cached(&self, x: &[T], masks: Option<&DropoutMasks<T>>) -> ForwardCache<T> {
        let n = self.layers.len();
        let mut acts = Vec::with_capacity(n + 1);
        let mut pre = Vec::with_capacity(n);
        acts.push(x.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(&acts[k]);
            let a = if k + 1 < n {
                let mut a: Vec<T> = z.iter().map(|&v| v.max(T::zero())).collect();
                if let Some(m) = masks {
                    for (v, &mk) in a.iter_mut().zip(&m[k]) {
                        *v = *v * mk;
                    }
                }
                a
            } else {
                z.clone()
            };
            pre.push(z);
            acts.push(a);
        }
        ForwardCache { acts, pre }
    }

    /// Inference: no dropout.
    pub fn predict(&self, x: &[T]) -> Result<T, MlpError> {
        self.check_input(x)?;
        Ok(self.forward_cached(x, None).acts[self.layers.len()][0])
    }

    /// Forward pass with explicit dropout masks (`None` for inference).
    pub fn forward_masked(&self, x: &[T], masks: Option<&DropoutMasks<T>>) -> Result<T, MlpError> {
        self.check_input(x)?;
        Ok(self.forward_cached(x, masks).acts[self.layers.len()][0])
    }

    /// Training-mode forward pass with masks drawn from `rng`.
    pub fn forward_train<R: Rng + ?Sized>(&self, x: &[T], rng: &mut R) -> Result<T, MlpError> {
        let masks = self.draw_masks(rng);
        self.forward_masked(x, Some(&masks))
    }

    /// Squared error `(y - target)^2` and its gradient for one sample.
    pub fn loss_and_gradients(
        &self,
        x: &[T],
        target: T,
        masks: Option<&DropoutMasks<T>>,
    ) -> Result<(T, Gradients<T>), MlpError> {
        self.check_input(x)?;
        let cache = self.forward_cached(x, masks);
        let n = self.layers.len();
        let y = cache.acts[n][0];
        let mut grads = Gradients::zeros_like(self);
        let mut delta = vec![T::lit(2.0) * (y - target)];
        for k in (0..n).rev() {
            let layer = &self.layers[k];
            let input = &cache.acts[k];
            for (o, &d) in delta.iter().enumerate() {
                grads.biases[k][o] = d;
                let row = &mut grads.weights[k][o * layer.n_in..(o + 1) * layer.n_in];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g = d * a;
                }
            }
            if k == 0 {
                break;
            }
            let mut prev = vec![T::zero(); layer.n_in];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.n_in..(o + 1) * layer.n_in];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p = *p + w * d;
                }
            }
            let z = &cache.pre[k - 1];
            for (i, p) in prev.iter_mut().enumerate() {
                let relu_grad = if z[i] > T::zero() {
                    T::one()
                } else {
                    T::zero()
                };
                let mask = masks.map_or(T::one(), |m| m[k - 1][i]);
                *p = *p * relu_grad * mask;
            }
            delta = prev;
        }
        let e = y - target;
        Ok((e * e, grads))
    }

    /// Parameter `i` in [`Gradients::flat`] order.
    fn param_mut(&mut self, mut i: usize) -> &mut T {
        let n_weights: usize = self.layers.iter().map(|l| l.weights.len()).sum();
        let in_weights = i < n_weights;
        if !in_weights {
            i -= n_weights;
        }
        for layer in &mut self.layers {
            let v = if in_weights {
                &mut layer.weights
            } else {
                &mut layer.biases
            };
            if i < v.len() {
                return &mut v[i];
            }
            i -= v.len();
        }
        panic!("parameter index out of range")
    }

    fn apply(&mut self, grads: &Gradients<T>, lr: T) {
        for (layer, (gw, gb)) in self
            .layers
            .iter_mut()
            .zip(grads.weights.iter().zip(&grads.biases))
        {
            for (w, &g) in layer.weights.iter_mut().zip(gw) {
                *w = *w - lr * g;
            }
            for (b, &g) in layer.biases.iter_mut().zip(gb) {
                *b = *b - lr * g;
            }
        }
    }

    /// Mean squared error in inference mode.
    pub fn mse(&self, data: &[(Vec<T>, T)]) -> Result<T, MlpError> {
        if data.is_empty() {
            return Err(MlpError::EmptyData);
        }
        let mut sum = T::zero();
        for (x, t) in data {
            let e = self.predict(x)? - *t;
            sum = sum + e * e;
        }
        Ok(sum / T::from_usize_lossy(data.len()))
    }
}

/// Largest relative difference between `analytic` and central finite
/// differences of the squared-error loss, over every parameter.
///
/// Relative error is `|a - n| / max(|a| + |n|, 1e-6)`. Dropout masks are held
/// fixed so the loss is a deterministic function of the parameters.
pub fn compare_with_finite_differences<T: Real>(
    model: &MlpModel<T>,
    x: &[T],
    target: T,
    masks: Option<&DropoutMasks<T>>,
    analytic: &Gradients<T>,
    h: T,
) -> Result<T, MlpError> {
    let analytic = analytic.flat();
    let mut probe = model.clone();
    let loss_at = |m: &MlpModel<T>| -> Result<T, MlpError> {
        let e = m.forward_masked(x, masks)? - target;
        Ok(e * e)
    };
    let n = probe.n_params();
    let mut worst = T::zero();
    for (i, &a) in analytic.iter().enumerate().take(n) {
        let orig = *probe.param_mut(i);
        *probe.param_mut(i) = orig + h;
        let up = loss_at(&probe)?;
        *probe.param_mut(i) = orig - h;
        let down = loss_at(&probe)?;
        *probe.param_mut(i) = orig;
        let numeric = (up - down) / (h + h);
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(T::lit(1e-6));
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Backprop against central differences with `h = 1e-5`, in inference mode.
pub fn gradient_check<T: Real>(model: &MlpModel<T>, x: &[T], target: T) -> Result<T, MlpError> {
    let (_, grads) = model.loss_and_gradients(x, target, None)?;
    compare_with_finite_differences(model, x, target, None, &grads, T::lit(1e-5))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub validation_fraction: f64,
    pub hidden: Vec<usize>,
    pub dropout: Vec<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            epochs: 100,
            batch_size: 32,
            seed: 42,
            validation_fraction: 0.2,
            hidden: vec![128, 64],
            dropout: vec![0.2, 0.3],
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), MlpError> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(MlpError::InvalidConfig(format!(
                "learning rate {}",
                self.lr
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(MlpError::InvalidConfig(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(MlpError::InvalidConfig(format!(
                "validation fraction {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord<T> {
    pub epoch: usize,
    pub train_mse: T,
    pub val_mse: Option<T>,
}

#[derive(Debug, Clone)]
pub struct TrainedMlp<T> {
    pub model: MlpModel<T>,
    pub trace: Vec<LossRecord<T>>,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Train a fresh `[d, hidden.., 1]` network on `(features, target)` rows.
///
/// Randomness comes from three ChaCha streams of `config.seed`: weight init,
/// the validation split, and batch order plus dropout.
pub fn train<T: Real>(
    data: &[(Vec<T>, T)],
    config: &TrainConfig,
) -> Result<TrainedMlp<T>, MlpError> {
    config.validate()?;
    let d = data.first().ok_or(MlpError::EmptyData)?.0.len();
    for (row, (x, t)) in data.iter().enumerate() {
        if x.len() != d {
            return Err(MlpError::ShapeMismatch {
                expected: d,
                got: x.len(),
            });
        }
        let v = t.to_f64_lossy();
        if !(-1.0..=1.0).contains(&v) {
            return Err(MlpError::TargetOutOfRange { row, value: v });
        }
    }
    let mut sizes = vec![d];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let mut model = MlpModel::new(&sizes, &config.dropout, config.seed)?;

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut stream(config.seed, 1));
    let n_val = (data.len() as f64 * config.validation_fraction).round() as usize;
    let n_val = if n_val >= data.len() { 0 } else { n_val };
    let mut val_indices = order[..n_val].to_vec();
    let mut train_indices = order[n_val..].to_vec();
    val_indices.sort_unstable();
    train_indices.sort_unstable();
    let train_rows: Vec<(Vec<T>, T)> = train_indices.iter().map(|&i| data[i].clone()).collect();
    let val_rows: Vec<(Vec<T>, T)> = val_indices.iter().map(|&i| data[i].clone()).collect();

    let mut rng = stream(config.seed, 2);
    let lr = T::lit(config.lr);
    let mut batch_order: Vec<usize> = (0..train_rows.len()).collect();
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        batch_order.shuffle(&mut rng);
        for batch in batch_order.chunks(config.batch_size) {
            let mut total = Gradients::zeros_like(&model);
            for &i in batch {
                let masks = model.draw_masks(&mut rng);
                let (_, g) =
                    model.loss_and_gradients(&train_rows[i].0, train_rows[i].1, Some(&masks))?;
                total.accumulate(&g);
            }
            total.scale(T::one() / T::from_usize_lossy(batch.len()));
            model.apply(&total, lr);
        }
        let train_mse = model.mse(&train_rows)?;
        let val_mse = if val_rows.is_empty() {
            None
        } else {
            Some(model.mse(&val_rows)?)
        };
        if !train_mse.is_finite() || val_mse.is_some_and(|v| !v.is_finite()) {
            return Err(MlpError::NonFiniteLoss(epoch));
        }
        log::debug!("epoch {epoch}: train {train_mse:?} val {val_mse:?}");
        trace.push(LossRecord {
            epoch,
            train_mse,
            val_mse,
        });
    }
    Ok(TrainedMlp {
        model,
        trace,
        train_indices,
        val_indices,
    })
}

/// Loss trace as CSV with header `epoch,train_mse,val_mse`.
pub fn write_loss_csv<T: Real, W: Write>(trace: &[LossRecord<T>], out: W) -> Result<(), MlpError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| MlpError::Io(std::io::Error::other(e));
    w.write_record(["epoch", "train_mse", "val_mse"])
        .map_err(io)?;
    for r in trace {
        w.write_record([
            r.epoch.to_string(),
            r.train_mse.to_f64_lossy().to_string(),
            r.val_mse
                .map(|v| v.to_f64_lossy().to_string())
                .unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

impl<T: Real + Serialize + DeserializeOwned> MlpModel<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MlpError> {
        let m: Self = serde_json::from_str(text).map_err(|e| MlpError::Format(e.to_string()))?;
        if m.format != MLP_FORMAT || m.version != MLP_VERSION {
            return Err(MlpError::Format(format!(
                "expected {MLP_FORMAT} v{MLP_VERSION}, found {} v{}",
                m.format, m.version
            )));
        }
        check_architecture(&m.layer_sizes, &m.dropout)?;
        let shapes_ok = m.layers.len() == m.layer_sizes.len() - 1
            && m.layers.iter().zip(m.layer_sizes.windows(2)).all(|(l, w)| {
                l.n_in == w[0]
                    && l.n_out == w[1]
                    && l.weights.len() == w[0] * w[1]
                    && l.biases.len() == w[1]
            });
        if !shapes_ok {
            return Err(MlpError::Format(
                "layer shapes do not match layer_sizes".into(),
            ));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), MlpError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MlpError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
