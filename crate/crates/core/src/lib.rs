//! Bilayer gossip decentralised parallel SGD.
//!
//! Mobile, range-limited devices in a bounded field are grouped each round by
//! a distributed K-means over their positions, train a local classifier, then
//! aggregate models through 1-to-1 gossip: first inside each cluster, then
//! across neighbouring clusters. Aggregation is a streaming sample-weighted
//! average (cumulative FedAvg) that keeps a single running sum per device.
//!
//! Modules, bottom-up:
//!
//! - [`data`]: synthetic datasets, IID and Dirichlet partitioning, label EMD.
//! - [`model`]: softmax / one-hidden-layer classifiers, SGD and Adam, metrics.
//! - [`sim`]: field, mobility, topology snapshots with Metropolis mixing
//!   weights, and a range-checked message transport.
//! - [`clustering`]: distributed K-means (geographic or EMD criterion).
//! - [`gossip`]: pairing, cumulative FedAvg, intra/inter phases, full rounds.
//! - [`analysis`]: spectra of mixing matrices, averaging-time and rate bounds,
//!   empirical consensus.
//! - [`baselines`]: centralised FedAvg and local-only training.
//! - [`harness`]: experiment configs, presets, runs, CSV/JSON export, comparison.
//!
//! All randomness flows from an experiment seed through [`rng::derive_seed`],
//! so a `(config, seed)` pair reproduces byte-identical outputs.

pub mod analysis;
pub mod baselines;
pub mod clustering;
pub mod data;
pub mod error;
pub mod gossip;
pub mod harness;
pub mod model;
pub mod rng;
pub mod sim;

pub use clustering::{ClusterAssignment, Clustering, ClusteringConfig, Criterion};
pub use data::{Dataset, LabelDistribution, PartitionMode, PartitionSpec, Shard};
pub use error::{Error, Result};
pub use gossip::{Accumulator, CostModel, GossipConfig, MixingMode, RoundReport};
pub use harness::{preset, run_experiment, ExperimentConfig, Method, MetricsRecord};
pub use model::{ModelShape, OptimiserConfig, OptimiserKind, OptimiserState, ParamVector, TrainConfig};
pub use sim::{DeviceState, FieldConfig, Simulation, TopologyGraph};
