use serde::{Deserialize, Serialize};

use super::{forward_sample, softmax_in_place, split_layers, ModelShape, ParamVector};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub loss: f64,
}

/// Argmax class for one feature row. Ties go to the lowest class index.
pub fn predict(params: &ParamVector, shape: &ModelShape, x: &[f64]) -> Result<usize> {
    shape.check_params(params)?;
    if x.len() != shape.input_dim {
        return Err(Error::DimensionMismatch {
            context: "feature dimension",
            expected: shape.input_dim,
            actual: x.len(),
        });
    }
    let layers = split_layers(shape, params.values());
    let mut hidden = vec![0.0; shape.hidden_dim];
    let mut logits = vec![0.0; shape.num_classes];
    forward_sample(shape, &layers, x, &mut hidden, &mut logits)?;
    Ok(argmax(&logits))
}

fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in z.iter().enumerate() {
        if v > z[best] {
            best = k;
        }
    }
    best
}

/// Accuracy, macro-F1 and mean cross-entropy over the whole dataset.
///
/// Macro-F1 averages per-class F1 over all `num_classes` classes. A class
/// that is never predicted and never present has `2TP + FP + FN = 0` and
/// contributes F1 = 0.
pub fn evaluate(params: &ParamVector, shape: &ModelShape, ds: &Dataset) -> Result<Evaluation> {
    shape.check_params(params)?;
    shape.check_dataset(ds)?;
    if ds.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let layers = split_layers(shape, params.values());
    let c = shape.num_classes;
    let mut hidden = vec![0.0; shape.hidden_dim];
    let mut z = vec![0.0; c];
    let mut tp = vec![0usize; c];
    let mut fp = vec![0usize; c];
    let mut fneg = vec![0usize; c];
    let mut loss = 0.0;
    let mut correct = 0usize;

    for i in 0..ds.len() {
        let y = ds.label(i);
        forward_sample(shape, &layers, ds.features(i), &mut hidden, &mut z)?;
        let pred = argmax(&z);
        let z_y = z[y];
        loss += softmax_in_place(&mut z) - z_y;
        if pred == y {
            correct += 1;
            tp[y] += 1;
        } else {
            fp[pred] += 1;
            fneg[y] += 1;
        }
    }

    let f1_sum: f64 = (0..c)
        .map(|k| {
            let denom = 2 * tp[k] + fp[k] + fneg[k];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[k] as f64 / denom as f64
            }
        })
        .sum();
    let n = ds.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        macro_f1: f1_sum / c as f64,
        loss: loss / n,
    })
}
