//! Small differentiable classifiers.
//!
//! Two shapes share one flat parameter layout:
//!
//! - `hidden_dim == 0`: multinomial logistic regression. Parameters are the
//!   `num_classes x input_dim` weight matrix (row-major) followed by the
//!   `num_classes` biases.
//! - `hidden_dim > 0`: one tanh hidden layer. Parameters are
//!   `W1 (hidden x input)`, `b1 (hidden)`, `W2 (classes x hidden)`, `b2 (classes)`.
//!
//! The loss is mean cross-entropy over the batch. Weight decay is not part of
//! the loss; optimisers apply it as decoupled decay (see [`optim`]).

mod metrics;
pub mod optim;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub use metrics::{evaluate, predict, Evaluation};
pub use optim::{optimiser_step, OptimiserConfig, OptimiserKind, OptimiserState};

/// Flat parameter vector plus the number of samples behind it.
///
/// The length is fixed at construction; only element access is exposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    values: Vec<f64>,
    pub sample_count: u64,
}

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            sample_count: 0,
        }
    }

    pub fn new(values: Vec<f64>, sample_count: u64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric { layer: "parameter vector" });
        }
        Ok(Self {
            values,
            sample_count,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_dim: usize,
    pub num_classes: usize,
    /// 0 selects the plain softmax classifier.
    #[serde(default)]
    pub hidden_dim: usize,
}

impl ModelShape {
    pub fn softmax(input_dim: usize, num_classes: usize) -> Self {
        Self {
            input_dim,
            num_classes,
            hidden_dim: 0,
        }
    }

    pub fn mlp(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        Self {
            input_dim,
            num_classes,
            hidden_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidConfig("input_dim must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig("num_classes must be at least 2".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        let (d, h, c) = (self.input_dim, self.hidden_dim, self.num_classes);
        if h == 0 {
            c * d + c
        } else {
            h * d + h + c * h + c
        }
    }

    /// Width of the layer feeding the output layer.
    fn penultimate(&self) -> usize {
        if self.hidden_dim == 0 {
            self.input_dim
        } else {
            self.hidden_dim
        }
    }

    /// Glorot-uniform weights, zero biases, sample_count 0.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> ParamVector {
        let mut values = Vec::with_capacity(self.param_count());
        let mut push_layer = |fan_out: usize, fan_in: usize, values: &mut Vec<f64>| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_out * fan_in {
                values.push(rng.random_range(-limit..limit));
            }
            values.extend(std::iter::repeat_n(0.0, fan_out));
        };
        if self.hidden_dim > 0 {
            push_layer(self.hidden_dim, self.input_dim, &mut values);
        }
        push_layer(self.num_classes, self.penultimate(), &mut values);
        ParamVector {
            values,
            sample_count: 0,
        }
    }

    pub(crate) fn check_params(&self, params: &ParamVector) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected: self.param_count(),
                actual: params.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        if ds.input_dim() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "feature dimension",
                expected: self.input_dim,
                actual: ds.input_dim(),
            });
        }
        if ds.class_count() > self.num_classes {
            return Err(Error::InvalidInput(format!(
                "dataset has {} classes, model only {}",
                ds.class_count(),
                self.num_classes
            )));
        }
        Ok(())
    }
}

/// Borrowed views into a parameter vector by layer.
struct Layers<'a> {
    hidden: Option<(&'a [f64], &'a [f64])>,
    out_w: &'a [f64],
    out_b: &'a [f64],
}

fn split_layers<'a>(shape: &ModelShape, p: &'a [f64]) -> Layers<'a> {
    let (d, h, c) = (shape.input_dim, shape.hidden_dim, shape.num_classes);
    if h == 0 {
        let (w, b) = p.split_at(c * d);
        Layers {
            hidden: None,
            out_w: w,
            out_b: b,
        }
    } else {
        let (w1, rest) = p.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(c * h);
        Layers {
            hidden: Some((w1, b1)),
            out_w: w2,
            out_b: b2,
        }
    }
}

/// Forward pass for one sample. Fills `hidden` (when present) and `logits`.
fn forward_sample(
    shape: &ModelShape,
    layers: &Layers<'_>,
    x: &[f64],
    hidden: &mut [f64],
    logits: &mut [f64],
) -> Result<()> {
    let input: &[f64] = match layers.hidden {
        Some((w1, b1)) => {
            for (j, hj) in hidden.iter_mut().enumerate() {
                let row = &w1[j * shape.input_dim..(j + 1) * shape.input_dim];
                let a: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b1[j];
                *hj = a.tanh();
            }
            if hidden.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric { layer: "hidden" });
            }
            hidden
        }
        None => x,
    };
    let width = input.len();
    for (k, zk) in logits.iter_mut().enumerate() {
        let row = &layers.out_w[k * width..(k + 1) * width];
        *zk = row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>() + layers.out_b[k];
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric { layer: "output" });
    }
    Ok(())
}

/// In-place softmax; returns log-sum-exp of the input logits.
fn softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
    max + sum.ln()
}

fn check_batch(shape: &ModelShape, params: &ParamVector, ds: &Dataset, batch: &[usize]) -> Result<()> {
    shape.check_params(params)?;
    shape.check_dataset(ds)?;
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    if let Some(&i) = batch.iter().find(|&&i| i >= ds.len()) {
        return Err(Error::InvalidInput(format!("sample index {i} out of range")));
    }
    Ok(())
}

/// Mean cross-entropy over `batch` and its exact gradient.
pub fn forward_loss(
    params: &ParamVector,
    shape: &ModelShape,
    ds: &Dataset,
    batch: &[usize],
) -> Result<(f64, Vec<f64>)> {
    check_batch(shape, params, ds, batch)?;
    let layers = split_layers(shape, params.values());
    let (d, h, c) = (shape.input_dim, shape.hidden_dim, shape.num_classes);
    let width = shape.penultimate();

    let mut grad = vec![0.0; params.len()];
    let mut hidden = vec![0.0; h];
    let mut probs = vec![0.0; c];
    let mut d_hidden = vec![0.0; h];
    let mut loss = 0.0;

    // Output-layer gradient slots sit after the hidden layer's.
    let out_offset = if h == 0 { 0 } else { h * d + h };

    for &i in batch {
        let x = ds.features(i);
        let y = ds.label(i);
        forward_sample(shape, &layers, x, &mut hidden, &mut probs)?;
        let z_y = probs[y];
        let lse = softmax_in_place(&mut probs);
        loss += lse - z_y;
        probs[y] -= 1.0; // now dL/dz

        let input: &[f64] = if h == 0 { x } else { &hidden };
        {
            let (gw, gb) = grad[out_offset..].split_at_mut(c * width);
            for k in 0..c {
                let dz = probs[k];
                for (g, v) in gw[k * width..(k + 1) * width].iter_mut().zip(input) {
                    *g += dz * v;
                }
                gb[k] += dz;
            }
        }
        if h > 0 {
            for (j, dh) in d_hidden.iter_mut().enumerate() {
                let mut back = 0.0;
                for (k, dz) in probs.iter().enumerate() {
                    back += layers.out_w[k * h + j] * dz;
                }
                *dh = back * (1.0 - hidden[j] * hidden[j]);
            }
            let (gw1, rest) = grad.split_at_mut(h * d);
            let gb1 = &mut rest[..h];
            for j in 0..h {
                for (g, xi) in gw1[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *g += d_hidden[j] * xi;
                }
                gb1[j] += d_hidden[j];
            }
        }
    }

    let n = batch.len() as f64;
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    if !loss.is_finite() {
        return Err(Error::Numeric { layer: "loss" });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric { layer: "gradient" });
    }
    Ok((loss, grad))
}

/// Local training schedule shared by every method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
}

fn default_epochs() -> usize {
    2
}
fn default_batch_size() -> usize {
    128
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Summary of a local training call.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub steps: usize,
    /// Mean minibatch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// `epochs` passes of minibatch updates over `shard`, reshuffled each epoch.
///
/// Batch size is clamped to the shard size. On success with `epochs > 0`,
/// `params.sample_count` becomes the shard size; `epochs == 0` is a no-op.
#[allow(clippy::too_many_arguments)]
pub fn train_local<R: Rng>(
    params: &mut ParamVector,
    opt: &mut OptimiserState,
    shape: &ModelShape,
    ds: &Dataset,
    shard: &[usize],
    epochs: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<TrainReport> {
    if shard.is_empty() {
        return Err(Error::EmptyShard);
    }
    if batch_size == 0 {
        return Err(Error::InvalidInput("batch_size must be positive".into()));
    }
    let mut report = TrainReport::default();
    if epochs == 0 {
        return Ok(report);
    }
    let batch_size = batch_size.min(shard.len());
    let mut order = shard.to_vec();
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(batch_size) {
            let (loss, grad) = forward_loss(params, shape, ds, batch)?;
            optimiser_step(params, &grad, opt)?;
            epoch_loss += loss;
            batches += 1;
        }
        report.steps += batches;
        report.epoch_losses.push(epoch_loss / batches as f64);
    }
    params.sample_count = shard.len() as u64;
    Ok(report)
}
