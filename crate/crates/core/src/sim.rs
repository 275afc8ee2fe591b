//! Bounded 2-D field with mobile, range-limited devices.
//!
//! Devices move at constant speed along a heading that drifts by Gaussian
//! noise each step and reflect off the field boundary. Each snapshot turns
//! positions into a [`TopologyGraph`]: an edge joins two devices when their
//! distance is within both of their communication ranges, and the mixing
//! matrix uses lazy Metropolis weights
//!
//! ```text
//! W_ij = 1 / (2 * max(deg_i, deg_j))   for each edge
//! W_ii = 1 - sum_j W_ij
//! ```
//!
//! which is symmetric and doubly stochastic with `W_ii >= 1/2`, so every
//! eigenvalue lies in `[0, 1]`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Shard;
use crate::error::{Error, Result};
use crate::model::{OptimiserConfig, OptimiserState, ParamVector};
use crate::rng::{rng_for, tag, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    #[serde(default = "default_field_size")]
    pub field_size: f64,
    pub device_count: usize,
    pub comm_range: f64,
    /// Distance units per step.
    #[serde(default = "default_speed")]
    pub speed: f64,
    /// Std-dev of the per-step heading perturbation, radians.
    #[serde(default = "default_heading_noise")]
    pub heading_noise: f64,
    /// Mobility steps taken at the end of every round.
    #[serde(default = "default_steps_per_round")]
    pub steps_per_round: usize,
}

fn default_field_size() -> f64 {
    100.0
}
fn default_speed() -> f64 {
    0.5
}
fn default_heading_noise() -> f64 {
    0.3
}
fn default_steps_per_round() -> usize {
    1
}

impl FieldConfig {
    pub fn new(device_count: usize, comm_range: f64) -> Self {
        Self {
            field_size: default_field_size(),
            device_count,
            comm_range,
            speed: default_speed(),
            heading_noise: default_heading_noise(),
            steps_per_round: default_steps_per_round(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.field_size) || !positive(self.comm_range) || self.device_count == 0 {
            return Err(Error::InvalidConfig(
                "field_size, comm_range and device_count must be positive".into(),
            ));
        }
        if !(self.speed.is_finite() && self.speed >= 0.0) || self.speed > self.field_size {
            return Err(Error::InvalidConfig(format!(
                "speed must lie in [0, field_size], got {}",
                self.speed
            )));
        }
        if !(self.heading_noise.is_finite() && self.heading_noise >= 0.0) {
            return Err(Error::InvalidConfig("heading_noise must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub id: usize,
    pub position: Point,
    pub speed: f64,
    pub heading: f64,
    pub comm_range: f64,
    pub shard: Shard,
    pub params: ParamVector,
    pub opt: OptimiserState,
    /// Gossip partners so far in the current phase.
    pub contacted: BTreeSet<usize>,
    /// Set when the last local training was skipped (empty shard).
    pub skipped_training: bool,
}

impl DeviceState {
    pub fn new(id: usize, position: Point, comm_range: f64, params: ParamVector, opt: OptimiserConfig) -> Self {
        let n = params.len();
        Self {
            id,
            position,
            speed: 0.0,
            heading: 0.0,
            comm_range,
            shard: Vec::new(),
            params,
            opt: OptimiserState::new(opt, n),
            contacted: BTreeSet::new(),
            skipped_training: false,
        }
    }
}

/// Move every device by `speed * dt` along its (perturbed) heading, reflecting
/// off the walls of `[0, field_size]^2`.
pub fn step_mobility<R: Rng>(
    devices: &mut [DeviceState],
    field_size: f64,
    heading_noise: f64,
    dt: f64,
    rng: &mut R,
) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be > 0, got {dt}")));
    }
    let noise = Normal::new(0.0, heading_noise)
        .map_err(|e| Error::InvalidInput(format!("heading noise: {e}")))?;
    for d in devices.iter_mut() {
        d.heading += noise.sample(rng);
        let step = d.speed * dt;
        let mut x = d.position.x + step * d.heading.cos();
        let mut y = d.position.y + step * d.heading.sin();
        let mut heading = d.heading;
        // One reflection per axis suffices while step <= field_size; loop
        // covers larger steps.
        for _ in 0..8 {
            let mut changed = false;
            if x < 0.0 {
                x = -x;
                heading = PI - heading;
                changed = true;
            } else if x > field_size {
                x = 2.0 * field_size - x;
                heading = PI - heading;
                changed = true;
            }
            if y < 0.0 {
                y = -y;
                heading = -heading;
                changed = true;
            } else if y > field_size {
                y = 2.0 * field_size - y;
                heading = -heading;
                changed = true;
            }
            if !changed {
                break;
            }
        }
        d.position = Point::new(x.clamp(0.0, field_size), y.clamp(0.0, field_size));
        d.heading = heading.rem_euclid(2.0 * PI);
    }
    Ok(())
}

/// Symmetric connectivity snapshot with its Metropolis mixing matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TopologyGraph {
    neighbours: Vec<Vec<usize>>,
    mixing: DMatrix<f64>,
}

impl TopologyGraph {
    /// Edges between devices within range of each other (`dist <= min(r_i, r_j)`).
    pub fn snapshot(devices: &[DeviceState]) -> Self {
        let n = devices.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let r = devices[i].comm_range.min(devices[j].comm_range);
                if devices[i].position.distance(&devices[j].position) <= r {
                    edges.push((i, j));
                }
            }
        }
        Self::from_edges(n, &edges)
    }

    pub fn from_positions(positions: &[Point], range: f64) -> Self {
        let n = positions.len();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if positions[i].distance(&positions[j]) <= range {
                    edges.push((i, j));
                }
            }
        }
        Self::from_edges(n, &edges)
    }

    /// Undirected graph from an edge list; self-loops and duplicates ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut sets = vec![BTreeSet::new(); n];
        for &(i, j) in edges {
            if i != j && i < n && j < n {
                sets[i].insert(j);
                sets[j].insert(i);
            }
        }
        let neighbours: Vec<Vec<usize>> = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        let mixing = metropolis(&neighbours);
        Self { neighbours, mixing }
    }

    pub fn len(&self) -> usize {
        self.neighbours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbours.is_empty()
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.neighbours[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbours[i].len()
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        i < self.len() && self.neighbours[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbours.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, ns) in self.neighbours.iter().enumerate() {
            out.extend(ns.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.mixing
    }

    /// Same vertex set, keeping only edges accepted by `keep`.
    pub fn filtered(&self, keep: impl Fn(usize, usize) -> bool) -> Self {
        let edges: Vec<_> = self.edges().into_iter().filter(|&(i, j)| keep(i, j)).collect();
        Self::from_edges(self.len(), &edges)
    }

    /// Induced subgraph on `vertices` (relabelled 0..k in the given order).
    pub fn induced(&self, vertices: &[usize]) -> Self {
        let index: BTreeMap<usize, usize> = vertices.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let mut edges = Vec::new();
        for (a, &v) in vertices.iter().enumerate() {
            for &u in &self.neighbours[v] {
                if let Some(&b) = index.get(&u) {
                    if a < b {
                        edges.push((a, b));
                    }
                }
            }
        }
        Self::from_edges(vertices.len(), &edges)
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &u in &self.neighbours[v] {
                    if !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                        queue.push_back(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }
}

fn metropolis(neighbours: &[Vec<usize>]) -> DMatrix<f64> {
    let n = neighbours.len();
    let mut w = DMatrix::zeros(n, n);
    for (i, ns) in neighbours.iter().enumerate() {
        for &j in ns {
            let m = neighbours[i].len().max(neighbours[j].len());
            w[(i, j)] = 1.0 / (2.0 * m as f64);
        }
    }
    for i in 0..n {
        let off: f64 = neighbours[i].iter().map(|&j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    w
}

pub fn neighbours(device: usize, graph: &TopologyGraph) -> &[usize] {
    graph.neighbours(device)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: usize,
    pub payload: ParamVector,
}

/// Reliable, in-order, range-checked delivery within one simulation step.
#[derive(Debug, Default)]
pub struct Transport {
    inboxes: BTreeMap<usize, VecDeque<Message>>,
    delivered: usize,
}

impl Transport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails with [`Error::RangeViolation`] when the pair is not an edge of
    /// the snapshot taken at send time.
    pub fn deliver(&mut self, graph: &TopologyGraph, sender: usize, receiver: usize, payload: ParamVector) -> Result<()> {
        if !graph.is_edge(sender, receiver) {
            return Err(Error::RangeViolation { sender, receiver });
        }
        self.inboxes
            .entry(receiver)
            .or_default()
            .push_back(Message { sender, payload });
        self.delivered += 1;
        Ok(())
    }

    pub fn drain(&mut self, receiver: usize) -> Vec<Message> {
        self.inboxes
            .remove(&receiver)
            .map(Vec::from)
            .unwrap_or_default()
    }

    pub fn delivered(&self) -> usize {
        self.delivered
    }
}

/// One row of a topology dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyEntry {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub cluster: usize,
    pub head: bool,
}

/// Devices plus the field and the mobility stream that moves them.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub field: FieldConfig,
    pub devices: Vec<DeviceState>,
    mobility_rng: SimRng,
    steps: u64,
}

impl Simulation {
    /// Places `shards.len()` devices uniformly at random with uniform
    /// headings. Every device starts from `init` with a fresh optimiser.
    pub fn new(
        field: FieldConfig,
        shards: Vec<Shard>,
        init: &ParamVector,
        opt: OptimiserConfig,
        seed: u64,
    ) -> Result<Self> {
        field.validate()?;
        if shards.len() != field.device_count {
            return Err(Error::InvalidConfig(format!(
                "{} shards for {} devices",
                shards.len(),
                field.device_count
            )));
        }
        let mut place = rng_for(seed, &[tag::PLACEMENT]);
        let devices = shards
            .into_iter()
            .enumerate()
            .map(|(id, shard)| {
                let pos = Point::new(
                    place.random_range(0.0..=field.field_size),
                    place.random_range(0.0..=field.field_size),
                );
                let mut d = DeviceState::new(id, pos, field.comm_range, init.clone(), opt);
                d.speed = field.speed;
                d.heading = place.random_range(0.0..2.0 * PI);
                d.shard = shard;
                d
            })
            .collect();
        Ok(Self {
            field,
            devices,
            mobility_rng: rng_for(seed, &[tag::MOBILITY]),
            steps: 0,
        })
    }

    pub fn snapshot(&self) -> TopologyGraph {
        TopologyGraph::snapshot(&self.devices)
    }

    pub fn step(&mut self) -> Result<()> {
        step_mobility(
            &mut self.devices,
            self.field.field_size,
            self.field.heading_noise,
            1.0,
            &mut self.mobility_rng,
        )?;
        self.steps += 1;
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn positions(&self) -> Vec<Point> {
        self.devices.iter().map(|d| d.position).collect()
    }
}
