//! Bilayer gossip rounds.
//!
//! A round is: cluster → local training → `G_intra` intra-cluster gossip
//! iterations → `G_inter` inter-cluster gossip iterations → mobility.
//!
//! Each gossip iteration draws a random maximal matching over the eligible
//! edges of the round's topology snapshot and exchanges models across every
//! pair in both directions. Two aggregation rules are available:
//!
//! - **Cumulative FedAvg** (default). Each device keeps one accumulator for
//!   the phase: a running `Σ N·w` and `Σ N`, seeded with its own model. On
//!   each exchange a device sends its current aggregate, carrying the
//!   accumulated count as its sample count, and folds in what it receives.
//!   The aggregate becomes the device model at phase end.
//! - **Fixed α**: `x_i ← α·x_i + (1 − α)·x_j` on both endpoints, applied
//!   immediately from the pre-exchange values.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{consensus_distances, layer_lambdas};
use crate::clustering::{cluster_devices, Clustering, ClusteringConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{train_local, ModelShape, ParamVector, TrainConfig};
use crate::rng::{rng_for, tag};
use crate::sim::{DeviceState, Simulation, TopologyEntry, TopologyGraph, Transport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingMode {
    CumulativeFedAvg,
    FixedAlpha(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GossipConfig {
    #[serde(default = "default_intra")]
    pub intra_rounds: usize,
    #[serde(default = "default_inter")]
    pub inter_rounds: usize,
    #[serde(default = "default_mixing")]
    pub mixing: MixingMode,
    /// Restrict inter-cluster gossip to cluster heads.
    #[serde(default)]
    pub heads_only_inter: bool,
}

fn default_intra() -> usize {
    3
}
fn default_inter() -> usize {
    2
}
fn default_mixing() -> MixingMode {
    MixingMode::CumulativeFedAvg
}

impl Default for GossipConfig {
    fn default() -> Self {
        Self {
            intra_rounds: default_intra(),
            inter_rounds: default_inter(),
            mixing: default_mixing(),
            heads_only_inter: false,
        }
    }
}

impl GossipConfig {
    pub fn validate(&self) -> Result<()> {
        if self.intra_rounds == 0 || self.inter_rounds == 0 {
            return Err(Error::InvalidConfig("gossip round counts must be positive".into()));
        }
        if let MixingMode::FixedAlpha(a) = self.mixing {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {a}")));
            }
        }
        Ok(())
    }
}

/// Simulated cost units used for `wall_step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    /// Per training sample per epoch.
    #[serde(default = "one")]
    pub train_per_sample: u64,
    #[serde(default = "one")]
    pub gossip_iteration: u64,
    /// Broadcast plus aggregation on a server round.
    #[serde(default = "two")]
    pub server_round: u64,
}

fn one() -> u64 {
    1
}
fn two() -> u64 {
    2
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            train_per_sample: 1,
            gossip_iteration: 1,
            server_round: 2,
        }
    }
}

impl CostModel {
    /// Devices train in parallel, so a round costs the slowest one.
    pub fn training(&self, devices: &[DeviceState], epochs: usize) -> u64 {
        devices
            .iter()
            .map(|d| d.shard.len() as u64 * epochs as u64 * self.train_per_sample)
            .max()
            .unwrap_or(0)
    }
}

/// Running `Σ N·w` and `Σ N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    w_sum: Vec<f64>,
    n_sum: u64,
}

impl Accumulator {
    pub fn new(len: usize) -> Self {
        Self {
            w_sum: vec![0.0; len],
            n_sum: 0,
        }
    }

    /// Starts from `own` when it carries samples, empty otherwise.
    pub fn seeded(own: &ParamVector) -> Self {
        let mut acc = Self::new(own.len());
        if own.sample_count > 0 {
            acc.accumulate(own).expect("lengths match and count is positive");
        }
        acc
    }

    pub fn w_sum(&self) -> &[f64] {
        &self.w_sum
    }

    pub fn n_sum(&self) -> u64 {
        self.n_sum
    }

    pub fn accumulate(&mut self, incoming: &ParamVector) -> Result<()> {
        if incoming.len() != self.w_sum.len() {
            return Err(Error::DimensionMismatch {
                context: "accumulated model",
                expected: self.w_sum.len(),
                actual: incoming.len(),
            });
        }
        if incoming.sample_count == 0 {
            return Err(Error::ZeroWeight);
        }
        let n = incoming.sample_count as f64;
        for (s, w) in self.w_sum.iter_mut().zip(incoming.values()) {
            *s += w * n;
        }
        self.n_sum += incoming.sample_count;
        Ok(())
    }

    pub fn finalise(&self) -> Result<ParamVector> {
        if self.n_sum == 0 {
            return Err(Error::EmptyAccumulator);
        }
        let n = self.n_sum as f64;
        ParamVector::new(self.w_sum.iter().map(|s| s / n).collect(), self.n_sum)
    }
}

/// Sample-weighted mean of models, in iteration order. Shared by gossip
/// aggregation and the centralised baseline.
pub fn weighted_mean<'a>(models: impl IntoIterator<Item = &'a ParamVector>) -> Result<ParamVector> {
    let mut it = models.into_iter();
    let first = it.next().ok_or(Error::EmptyAccumulator)?;
    let mut acc = Accumulator::new(first.len());
    acc.accumulate(first)?;
    let mut single = true;
    for m in it {
        acc.accumulate(m)?;
        single = false;
    }
    // w·N/N is not always w in floating point; one model is its own mean.
    if single {
        return ParamVector::new(first.values().to_vec(), first.sample_count);
    }
    acc.finalise()
}

/// `α·x_i + (1 − α)·x_j`, evaluated as `x_j + α·(x_i − x_j)` so equal
/// inputs are an exact fixed point.
pub fn mix_fixed_alpha(x_i: &[f64], x_j: &[f64], alpha: f64) -> Vec<f64> {
    x_i.iter().zip(x_j).map(|(a, b)| b + alpha * (a - b)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layer {
    Intra,
    Inter,
}

fn eligible(layer: Layer, cluster_of: &[usize], i: usize, j: usize) -> bool {
    match layer {
        Layer::Intra => cluster_of[i] == cluster_of[j],
        Layer::Inter => cluster_of[i] != cluster_of[j],
    }
}

/// Random maximal matching over eligible edges between active devices.
///
/// Devices are visited in a shuffled order; each unmatched one picks a
/// uniformly random unmatched eligible neighbour, preferring those not in
/// its `contacted` set. Pairs come back as `(low, high)`, sorted.
pub fn pair_devices<R: Rng>(
    active: &[bool],
    graph: &TopologyGraph,
    cluster_of: &[usize],
    layer: Layer,
    contacted: &[BTreeSet<usize>],
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let n = graph.len();
    let mut order: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
    order.shuffle(rng);
    let mut matched = vec![false; n];
    let mut pairs = Vec::new();
    for d in order {
        if matched[d] {
            continue;
        }
        let candidates: Vec<usize> = graph
            .neighbours(d)
            .iter()
            .copied()
            .filter(|&j| active[j] && !matched[j] && eligible(layer, cluster_of, d, j))
            .collect();
        let fresh: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|j| !contacted[d].contains(j))
            .collect();
        let pool = if fresh.is_empty() { &candidates } else { &fresh };
        if let Some(&j) = pool.choose(rng) {
            matched[d] = true;
            matched[j] = true;
            pairs.push((d.min(j), d.max(j)));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Disjointness, edge validity and layer eligibility of one iteration.
pub fn validate_pairing(
    pairs: &[(usize, usize)],
    graph: &TopologyGraph,
    cluster_of: &[usize],
    layer: Layer,
) -> Result<()> {
    let mut seen = BTreeSet::new();
    for &(i, j) in pairs {
        if i == j || !seen.insert(i) || !seen.insert(j) {
            return Err(Error::PairingViolation(format!("device reused in pair ({i}, {j})")));
        }
        if !graph.is_edge(i, j) {
            return Err(Error::PairingViolation(format!("pair ({i}, {j}) is not an edge")));
        }
        if !eligible(layer, cluster_of, i, j) {
            return Err(Error::PairingViolation(format!(
                "pair ({i}, {j}) is not eligible for the {layer:?} layer"
            )));
        }
    }
    Ok(())
}

/// What one phase did.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub pairings: Vec<Vec<(usize, usize)>>,
    pub messages: usize,
}

#[allow(clippy::too_many_arguments)]
fn run_phase<R: Rng>(
    devices: &mut [DeviceState],
    cluster_of: &[usize],
    active: &[bool],
    graph: &TopologyGraph,
    layer: Layer,
    iterations: usize,
    mixing: MixingMode,
    rng: &mut R,
) -> Result<PhaseReport> {
    let n = devices.len();
    if graph.len() != n || cluster_of.len() != n {
        return Err(Error::DimensionMismatch {
            context: "phase device count",
            expected: n,
            actual: graph.len(),
        });
    }
    let mut contacted: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    let mut accs: Vec<Accumulator> = match mixing {
        MixingMode::CumulativeFedAvg => devices.iter().map(|d| Accumulator::seeded(&d.params)).collect(),
        MixingMode::FixedAlpha(_) => Vec::new(),
    };
    let mut received = vec![false; n];
    let mut transport = Transport::new();
    let mut report = PhaseReport::default();

    for _ in 0..iterations {
        let pairs = pair_devices(active, graph, cluster_of, layer, &contacted, rng);
        validate_pairing(&pairs, graph, cluster_of, layer)?;
        for &(i, j) in &pairs {
            let (pi, pj) = match mixing {
                MixingMode::CumulativeFedAvg => (current(&accs[i], &devices[i]), current(&accs[j], &devices[j])),
                MixingMode::FixedAlpha(_) => (devices[i].params.clone(), devices[j].params.clone()),
            };
            transport.deliver(graph, i, j, pi)?;
            transport.deliver(graph, j, i, pj)?;
            for (me, peer) in [(i, j), (j, i)] {
                for msg in transport.drain(me) {
                    debug_assert_eq!(msg.sender, peer);
                    match mixing {
                        MixingMode::CumulativeFedAvg => {
                            if msg.payload.sample_count > 0 {
                                accs[me].accumulate(&msg.payload)?;
                                received[me] = true;
                            }
                        }
                        MixingMode::FixedAlpha(alpha) => {
                            let mixed = mix_fixed_alpha(devices[me].params.values(), msg.payload.values(), alpha);
                            let count = devices[me].params.sample_count;
                            devices[me].params = ParamVector::new(mixed, count)?;
                        }
                    }
                }
            }
            contacted[i].insert(j);
            contacted[j].insert(i);
        }
        report.pairings.push(pairs);
    }

    if let MixingMode::CumulativeFedAvg = mixing {
        for ((d, acc), got) in devices.iter_mut().zip(&accs).zip(received) {
            if got {
                d.params = acc.finalise()?;
            }
        }
    }
    for (d, c) in devices.iter_mut().zip(contacted) {
        d.contacted = c;
    }
    report.messages = transport.delivered();
    Ok(report)
}

/// The model a device would hand over right now.
fn current(acc: &Accumulator, device: &DeviceState) -> ParamVector {
    if acc.n_sum() > 0 {
        acc.finalise().expect("non-empty accumulator")
    } else {
        device.params.clone()
    }
}

pub fn run_intra_phase<R: Rng>(
    devices: &mut [DeviceState],
    clustering: &Clustering,
    graph: &TopologyGraph,
    cfg: &GossipConfig,
    rng: &mut R,
) -> Result<PhaseReport> {
    let active = vec![true; devices.len()];
    run_phase(
        devices,
        &clustering.cluster_of,
        &active,
        graph,
        Layer::Intra,
        cfg.intra_rounds,
        cfg.mixing,
        rng,
    )
}

pub fn run_inter_phase<R: Rng>(
    devices: &mut [DeviceState],
    clustering: &Clustering,
    graph: &TopologyGraph,
    cfg: &GossipConfig,
    rng: &mut R,
) -> Result<PhaseReport> {
    let active: Vec<bool> = if cfg.heads_only_inter {
        (0..devices.len()).map(|d| clustering.is_head(d)).collect()
    } else {
        vec![true; devices.len()]
    };
    run_phase(
        devices,
        &clustering.cluster_of,
        &active,
        graph,
        Layer::Inter,
        cfg.inter_rounds,
        cfg.mixing,
        rng,
    )
}

/// One JSON line per round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub cluster_count: usize,
    pub heads: Vec<usize>,
    pub intra_pairings: Vec<Vec<(usize, usize)>>,
    pub inter_pairings: Vec<Vec<(usize, usize)>>,
    /// Squared distance of each device model from the unweighted mean,
    /// after gossip.
    pub consensus_distance: Vec<f64>,
    pub messages: usize,
    pub lambda2_intra: f64,
    pub lambda2_inter: f64,
    /// Simulated cost of this round.
    pub wall_steps: u64,
    /// Devices that skipped training (empty shard).
    pub skipped_training: Vec<usize>,
}

/// Everything one round needs besides the simulation itself.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext<'a> {
    pub data: &'a Dataset,
    pub shape: &'a ModelShape,
    pub training: TrainConfig,
    pub gossip: &'a GossipConfig,
    pub clustering: &'a ClusteringConfig,
    pub cost: CostModel,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub report: RoundReport,
    pub clustering: Clustering,
    /// Positions and clusters before the end-of-round mobility step.
    pub topology: Vec<TopologyEntry>,
}

/// Local training on every device with a non-empty shard. Each device draws
/// from its own stream, so the result does not depend on thread scheduling.
pub fn train_all(
    devices: &mut [DeviceState],
    data: &Dataset,
    shape: &ModelShape,
    training: TrainConfig,
    seed: u64,
    round: usize,
) -> Result<Vec<usize>> {
    devices
        .par_iter_mut()
        .map(|d| {
            if d.shard.is_empty() {
                d.skipped_training = true;
                return Ok(());
            }
            d.skipped_training = false;
            let mut rng = rng_for(seed, &[tag::TRAINING, round as u64, d.id as u64]);
            train_local(
                &mut d.params,
                &mut d.opt,
                shape,
                data,
                &d.shard,
                training.epochs,
                training.batch_size,
                &mut rng,
            )
            .map(|_| ())
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(devices.iter().filter(|d| d.skipped_training).map(|d| d.id).collect())
}

/// Cluster → train → intra gossip → inter gossip → move.
pub fn run_round(sim: &mut Simulation, ctx: &RoundContext<'_>, round: usize) -> Result<RoundOutcome> {
    let r = round as u64;
    let graph = sim.snapshot();
    let clustering = cluster_devices(
        &sim.devices,
        ctx.data,
        &graph,
        ctx.clustering,
        &mut rng_for(ctx.seed, &[tag::CLUSTERING, r]),
    )?;
    let (lambda2_intra, lambda2_inter) = layer_lambdas(&graph, &clustering)?;

    let train_cost = ctx.cost.training(&sim.devices, ctx.training.epochs);
    let skipped = train_all(&mut sim.devices, ctx.data, ctx.shape, ctx.training, ctx.seed, round)?;

    let intra = run_intra_phase(
        &mut sim.devices,
        &clustering,
        &graph,
        ctx.gossip,
        &mut rng_for(ctx.seed, &[tag::INTRA, r]),
    )?;
    let inter = run_inter_phase(
        &mut sim.devices,
        &clustering,
        &graph,
        ctx.gossip,
        &mut rng_for(ctx.seed, &[tag::INTER, r]),
    )?;

    let vectors: Vec<&[f64]> = sim.devices.iter().map(|d| d.params.values()).collect();
    let consensus_distance = consensus_distances(&vectors);
    let topology = sim
        .devices
        .iter()
        .map(|d| TopologyEntry {
            id: d.id,
            x: d.position.x,
            y: d.position.y,
            cluster: clustering.cluster_of[d.id],
            head: clustering.is_head(d.id),
        })
        .collect();

    for _ in 0..sim.field.steps_per_round {
        sim.step()?;
    }

    let gossip_iters = (ctx.gossip.intra_rounds + ctx.gossip.inter_rounds) as u64;
    let report = RoundReport {
        round,
        cluster_count: clustering.len(),
        heads: clustering.heads(),
        intra_pairings: intra.pairings,
        inter_pairings: inter.pairings,
        consensus_distance,
        messages: intra.messages + inter.messages,
        lambda2_intra,
        lambda2_inter,
        wall_steps: train_cost + gossip_iters * ctx.cost.gossip_iteration,
        skipped_training: skipped,
    };
    Ok(RoundOutcome {
        report,
        clustering,
        topology,
    })
}
