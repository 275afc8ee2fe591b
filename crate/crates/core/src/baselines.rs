//! Reference methods: centralised FedAvg and isolated local training.
//!
//! The server is a plain function. It broadcasts the global model, lets every
//! device train on its shard and replaces the global model with the
//! sample-weighted mean of the results, using the same [`weighted_mean`] as
//! gossip aggregation. Devices keep their own optimiser state across rounds.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gossip::{train_all, weighted_mean};
use crate::model::{evaluate, train_local, Evaluation, ModelShape, OptimiserConfig, OptimiserState, ParamVector, TrainConfig};
use crate::rng::{rng_for, tag};
use crate::sim::DeviceState;

#[derive(Debug, Clone, PartialEq)]
pub struct CflState {
    pub global: ParamVector,
    pub round: usize,
}

impl CflState {
    pub fn new(global: ParamVector) -> Self {
        Self { global, round: 0 }
    }
}

/// Broadcast, train, aggregate. Devices with empty shards sit out.
pub fn cfl_round(
    state: &mut CflState,
    devices: &mut [DeviceState],
    data: &Dataset,
    shape: &ModelShape,
    training: TrainConfig,
    seed: u64,
) -> Result<()> {
    for d in devices.iter_mut() {
        d.params = state.global.clone();
    }
    train_all(devices, data, shape, training, seed, state.round)?;
    let trained = devices.iter().filter(|d| !d.skipped_training).map(|d| &d.params);
    let global = weighted_mean(trained)?;
    if !global.is_finite() {
        return Err(Error::Numeric { layer: "aggregate" });
    }
    state.global = global;
    state.round += 1;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CflEvaluation {
    /// The aggregated model on the test set.
    pub global: Evaluation,
    /// Test accuracy of each device's locally trained model, weighted by
    /// shard size.
    pub weighted_accuracy: f64,
    pub device_accuracy: Vec<f64>,
}

pub fn cfl_evaluate(state: &CflState, devices: &[DeviceState], test: &Dataset, shape: &ModelShape) -> Result<CflEvaluation> {
    let global = evaluate(&state.global, shape, test)?;
    let device_accuracy = devices
        .iter()
        .map(|d| evaluate(&d.params, shape, test).map(|e| e.accuracy))
        .collect::<Result<Vec<_>>>()?;
    Ok(CflEvaluation {
        global,
        weighted_accuracy: weighted_accuracy(devices, &device_accuracy),
        device_accuracy,
    })
}

/// `Σ N_i·acc_i / Σ N_i`; plain mean when no device holds data.
pub fn weighted_accuracy(devices: &[DeviceState], accuracy: &[f64]) -> f64 {
    let total: usize = devices.iter().map(|d| d.shard.len()).sum();
    if total == 0 {
        return accuracy.iter().sum::<f64>() / accuracy.len().max(1) as f64;
    }
    devices
        .iter()
        .zip(accuracy)
        .map(|(d, a)| d.shard.len() as f64 * a)
        .sum::<f64>()
        / total as f64
}

/// One round of isolated training on every device.
pub fn local_only_round(
    devices: &mut [DeviceState],
    data: &Dataset,
    shape: &ModelShape,
    training: TrainConfig,
    seed: u64,
    round: usize,
) -> Result<()> {
    train_all(devices, data, shape, training, seed, round)?;
    Ok(())
}

pub fn evaluate_devices(devices: &[DeviceState], test: &Dataset, shape: &ModelShape) -> Result<Vec<Evaluation>> {
    devices.iter().map(|d| evaluate(&d.params, shape, test)).collect()
}

/// A single model trained on the whole training set with the same
/// optimiser settings; the upper-bound reference.
#[derive(Debug, Clone)]
pub struct ReferenceModel {
    pub params: ParamVector,
    opt: OptimiserState,
    indices: Vec<usize>,
}

impl ReferenceModel {
    pub fn new(init: ParamVector, opt: OptimiserConfig, data: &Dataset) -> Self {
        let n = init.len();
        Self {
            params: init,
            opt: OptimiserState::new(opt, n),
            indices: data.all_indices(),
        }
    }

    pub fn train_round(&mut self, data: &Dataset, shape: &ModelShape, training: TrainConfig, seed: u64, round: usize) -> Result<()> {
        let mut rng = rng_for(seed, &[tag::TRAINING, round as u64, u64::MAX]);
        train_local(
            &mut self.params,
            &mut self.opt,
            shape,
            data,
            &self.indices,
            training.epochs,
            training.batch_size,
            &mut rng,
        )?;
        Ok(())
    }
}
