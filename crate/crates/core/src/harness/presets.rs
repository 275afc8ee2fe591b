//! Named ablation configurations.
//!
//! All presets share the desk-scale defaults below and differ only in the
//! knob named by the preset.

use crate::clustering::{ClusteringConfig, Criterion};
use crate::data::PartitionSpec;
use crate::error::{Error, Result};
use crate::gossip::{CostModel, GossipConfig};
use crate::model::{OptimiserConfig, TrainConfig};
use crate::sim::FieldConfig;

use super::config::{DataConfig, ExperimentConfig, Method, ModelConfig};

pub const PRESET_NAMES: &[&str] = &[
    "iid-30",
    "alpha-10",
    "alpha-0.5",
    "alpha-0.1",
    "devices-60",
    "devices-100",
    "range-15",
    "range-30",
    "range-45",
    "range-60",
    "range-90",
    "emd-clustering",
    "weight-decay-1e-3",
];

const ROUNDS: usize = 20;
const LEARNING_RATE: f64 = 0.05;
const WEIGHT_DECAY: f64 = 1e-5;
/// The other weight-decay value in circulation for this setup.
const ALT_WEIGHT_DECAY: f64 = 1e-3;
const SPREAD: f64 = 1.4;
const BATCH_SIZE: usize = 16;

/// One initial head per eight devices.
fn k_init(devices: usize) -> usize {
    devices.div_ceil(8).max(1)
}

fn base(name: &str, devices: usize, range: f64, partition: PartitionSpec) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        seed: 0,
        rounds: ROUNDS,
        method: Method::Dfl,
        field: FieldConfig::new(devices, range),
        partition,
        gossip: GossipConfig::default(),
        clustering: ClusteringConfig::new(k_init(devices)),
        model: ModelConfig::default(),
        optimiser: OptimiserConfig::adam(LEARNING_RATE, WEIGHT_DECAY),
        training: TrainConfig {
            batch_size: BATCH_SIZE,
            ..TrainConfig::default()
        },
        data: DataConfig {
            spread: SPREAD,
            ..DataConfig::default()
        },
        cost: CostModel::default(),
        output: None,
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let cfg = match name {
        "iid-30" => base(name, 30, 60.0, PartitionSpec::iid()),
        "alpha-10" => base(name, 30, 60.0, PartitionSpec::dirichlet(10.0)),
        "alpha-0.5" => base(name, 30, 60.0, PartitionSpec::dirichlet(0.5)),
        "alpha-0.1" => base(name, 30, 60.0, PartitionSpec::dirichlet(0.1)),
        "devices-60" => base(name, 60, 60.0, PartitionSpec::iid()),
        "devices-100" => base(name, 100, 60.0, PartitionSpec::iid()),
        "range-15" => base(name, 60, 15.0, PartitionSpec::iid()),
        "range-30" => base(name, 60, 30.0, PartitionSpec::iid()),
        "range-45" => base(name, 60, 45.0, PartitionSpec::iid()),
        "range-60" => base(name, 60, 60.0, PartitionSpec::iid()),
        "range-90" => base(name, 60, 90.0, PartitionSpec::iid()),
        "emd-clustering" => {
            let mut c = base(name, 60, 60.0, PartitionSpec::dirichlet(0.5));
            c.clustering.criterion = Criterion::Emd;
            c
        }
        "weight-decay-1e-3" => {
            let mut c = base(name, 30, 60.0, PartitionSpec::iid());
            c.optimiser = OptimiserConfig::adam(LEARNING_RATE, ALT_WEIGHT_DECAY);
            c
        }
        _ => {
            return Err(Error::UnknownPreset {
                name: name.to_string(),
                valid: PRESET_NAMES.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    Ok(cfg)
}
