//! Distributed K-means over range-limited devices.
//!
//! Each iteration:
//!
//! 1. Every non-head device joins the nearest head within range.
//! 2. A device with no head in range but with neighbours adopts the cluster
//!    of its nearest in-range device that already has one. Adoption runs in
//!    device-id order and repeats until nothing changes, so chains form
//!    within one iteration. If a group of devices is left with no head to
//!    reach, its lowest-id device is promoted to head.
//! 3. A device with no neighbours at all becomes a new head.
//! 4. Each cluster's head moves to its medoid: the member closest to the
//!    member centroid. A head that gathered no members and is not isolated
//!    moves to a random device that is not a head; if every device is
//!    already a head it stays.
//!
//! The loop stops once the head set stops changing or after the iteration
//! cap. The number of clusters may exceed `k_init` because isolated devices
//! become heads of their own.
//!
//! "Nearest" is Euclidean distance in geographic mode and label-distribution
//! EMD in EMD mode; the in-range test is always geometric. Ties go to the
//! lower device id.

use std::collections::BTreeSet;

use rand::seq::{index, IndexedRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{emd, label_distribution, Dataset, LabelDistribution};
use crate::error::{Error, Result};
use crate::sim::{DeviceState, Point, TopologyGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    Geographic,
    Emd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    pub k_init: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_criterion")]
    pub criterion: Criterion,
}

fn default_max_iterations() -> usize {
    5
}
fn default_criterion() -> Criterion {
    Criterion::Geographic
}

impl ClusteringConfig {
    pub fn new(k_init: usize) -> Self {
        Self {
            k_init,
            max_iterations: default_max_iterations(),
            criterion: default_criterion(),
        }
    }

    pub fn validate(&self, device_count: usize) -> Result<()> {
        if self.k_init == 0 || self.max_iterations == 0 {
            return Err(Error::InvalidConfig("k_init and max_iterations must be positive".into()));
        }
        if self.k_init > device_count {
            return Err(Error::InvalidConfig(format!(
                "k_init {} exceeds device count {device_count}",
                self.k_init
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub cluster_id: usize,
    pub head: usize,
    /// Sorted; always contains `head`.
    pub members: Vec<usize>,
}

/// The rule that placed a device in its cluster on the final iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Admission {
    Head,
    NearestHead,
    /// Adopted the cluster of this in-range device.
    NearestDevice(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Ordered by head id; `cluster_id` is the index.
    pub clusters: Vec<ClusterAssignment>,
    /// Cluster index per device.
    pub cluster_of: Vec<usize>,
    pub admissions: Vec<Admission>,
    pub iterations: usize,
    pub converged: bool,
}

impl Clustering {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn heads(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.head).collect()
    }

    pub fn is_head(&self, device: usize) -> bool {
        self.clusters[self.cluster_of[device]].head == device
    }

    /// Every device in the same cluster.
    pub fn single(n: usize) -> Self {
        Self {
            clusters: vec![ClusterAssignment {
                cluster_id: 0,
                head: 0,
                members: (0..n).collect(),
            }],
            cluster_of: vec![0; n],
            admissions: (0..n)
                .map(|i| if i == 0 { Admission::Head } else { Admission::NearestHead })
                .collect(),
            iterations: 0,
            converged: true,
        }
    }
}

/// Distance and medoid notion used by the clustering loop.
pub trait ClusterSpace {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn distance(&self, i: usize, j: usize) -> f64;
    /// Member closest to the members' centroid; ties to the lower id.
    fn medoid(&self, members: &[usize]) -> usize;
}

pub struct GeoSpace {
    positions: Vec<Point>,
}

impl GeoSpace {
    pub fn new(positions: Vec<Point>) -> Self {
        Self { positions }
    }
}

impl ClusterSpace for GeoSpace {
    fn len(&self) -> usize {
        self.positions.len()
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        self.positions[i].distance(&self.positions[j])
    }

    fn medoid(&self, members: &[usize]) -> usize {
        let k = members.len() as f64;
        let (sx, sy) = members.iter().fold((0.0, 0.0), |(sx, sy), &m| {
            (sx + self.positions[m].x, sy + self.positions[m].y)
        });
        let centroid = Point::new(sx / k, sy / k);
        argmin_by_id(members, |m| self.positions[m].distance(&centroid))
    }
}

pub struct EmdSpace {
    dists: Vec<LabelDistribution>,
}

impl EmdSpace {
    pub fn new(dists: Vec<LabelDistribution>) -> Self {
        Self { dists }
    }

    pub fn from_devices(devices: &[DeviceState], ds: &Dataset) -> Result<Self> {
        let dists = devices
            .iter()
            .map(|d| label_distribution(ds, &d.shard))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dists })
    }
}

impl ClusterSpace for EmdSpace {
    fn len(&self) -> usize {
        self.dists.len()
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        emd(&self.dists[i], &self.dists[j]).expect("distributions share a class count")
    }

    fn medoid(&self, members: &[usize]) -> usize {
        let mean = LabelDistribution::mean(members.iter().map(|&m| &self.dists[m]))
            .expect("medoid of an empty cluster");
        argmin_by_id(members, |m| emd(&self.dists[m], &mean).expect("same class count"))
    }
}

fn argmin_by_id(candidates: &[usize], key: impl Fn(usize) -> f64) -> usize {
    let mut best = candidates[0];
    let mut best_key = key(best);
    for &c in &candidates[1..] {
        let k = key(c);
        if k < best_key || (k == best_key && c < best) {
            best = c;
            best_key = k;
        }
    }
    best
}

pub fn head_stability(prev: &BTreeSet<usize>, new: &BTreeSet<usize>) -> bool {
    prev == new
}

/// Geographic DK-means.
pub fn dk_means<R: Rng>(
    devices: &[DeviceState],
    graph: &TopologyGraph,
    cfg: &ClusteringConfig,
    rng: &mut R,
) -> Clustering {
    let space = GeoSpace::new(devices.iter().map(|d| d.position).collect());
    run_random_init(&space, graph, cfg, rng)
}

/// DK-means with label-distribution EMD as the distance.
pub fn dk_means_emd<R: Rng>(
    devices: &[DeviceState],
    ds: &Dataset,
    graph: &TopologyGraph,
    cfg: &ClusteringConfig,
    rng: &mut R,
) -> Result<Clustering> {
    let space = EmdSpace::from_devices(devices, ds)?;
    Ok(run_random_init(&space, graph, cfg, rng))
}

/// Dispatch on `cfg.criterion`.
pub fn cluster_devices<R: Rng>(
    devices: &[DeviceState],
    ds: &Dataset,
    graph: &TopologyGraph,
    cfg: &ClusteringConfig,
    rng: &mut R,
) -> Result<Clustering> {
    match cfg.criterion {
        Criterion::Geographic => Ok(dk_means(devices, graph, cfg, rng)),
        Criterion::Emd => dk_means_emd(devices, ds, graph, cfg, rng),
    }
}

fn run_random_init<S: ClusterSpace, R: Rng>(
    space: &S,
    graph: &TopologyGraph,
    cfg: &ClusteringConfig,
    rng: &mut R,
) -> Clustering {
    let n = space.len();
    let k = cfg.k_init.clamp(1, n.max(1));
    let heads: BTreeSet<usize> = if n == 0 {
        BTreeSet::new()
    } else {
        index::sample(rng, n, k).into_iter().collect()
    };
    dk_means_from_heads(space, graph, heads, cfg.max_iterations, rng)
}

/// The clustering loop from explicit initial heads.
pub fn dk_means_from_heads<S: ClusterSpace, R: Rng>(
    space: &S,
    graph: &TopologyGraph,
    initial_heads: BTreeSet<usize>,
    max_iterations: usize,
    rng: &mut R,
) -> Clustering {
    let n = space.len();
    assert_eq!(n, graph.len(), "space and graph disagree on device count");
    let mut heads = initial_heads;
    let max_iterations = max_iterations.max(1);
    let mut iter = 0;
    loop {
        iter += 1;
        let round = assign(space, graph, &heads);
        let updated = update_heads(space, graph, &round, rng);
        let stable = head_stability(&round.heads, &updated);
        if stable || iter >= max_iterations {
            return round.into_clustering(iter, stable);
        }
        heads = updated;
    }
}

struct Assignment {
    heads: BTreeSet<usize>,
    /// Head id per device.
    owner: Vec<usize>,
    admissions: Vec<Admission>,
}

impl Assignment {
    fn into_clustering(self, iterations: usize, converged: bool) -> Clustering {
        let n = self.owner.len();
        let heads: Vec<usize> = self.heads.iter().copied().collect();
        let mut clusters: Vec<ClusterAssignment> = heads
            .iter()
            .enumerate()
            .map(|(cluster_id, &head)| ClusterAssignment {
                cluster_id,
                head,
                members: Vec::new(),
            })
            .collect();
        let mut cluster_of = vec![0; n];
        for (d, (owner, slot)) in self.owner.iter().zip(cluster_of.iter_mut()).enumerate() {
            let c = heads.binary_search(owner).expect("owner is a head");
            clusters[c].members.push(d);
            *slot = c;
        }
        Clustering {
            clusters,
            cluster_of,
            admissions: self.admissions,
            iterations,
            converged,
        }
    }
}

fn nearest<S: ClusterSpace>(space: &S, from: usize, candidates: impl Iterator<Item = usize>) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for c in candidates {
        let d = space.distance(from, c);
        match best {
            Some((bd, bc)) if d > bd || (d == bd && c > bc) => {}
            _ => best = Some((d, c)),
        }
    }
    best.map(|(_, c)| c)
}

fn assign<S: ClusterSpace>(space: &S, graph: &TopologyGraph, initial: &BTreeSet<usize>) -> Assignment {
    let n = space.len();
    let mut heads = initial.clone();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut admissions = vec![Admission::Head; n];
    for &h in &heads {
        owner[h] = Some(h);
    }

    let mut pending = Vec::new();
    for d in 0..n {
        if owner[d].is_some() {
            continue;
        }
        let in_range = graph.neighbours(d).iter().copied().filter(|j| heads.contains(j));
        if let Some(h) = nearest(space, d, in_range) {
            owner[d] = Some(h);
            admissions[d] = Admission::NearestHead;
        } else if graph.degree(d) > 0 {
            pending.push(d);
        } else {
            heads.insert(d);
            owner[d] = Some(d);
        }
    }

    while !pending.is_empty() {
        let mut progress = false;
        for &d in &pending {
            let in_range_heads = graph.neighbours(d).iter().copied().filter(|j| heads.contains(j));
            if let Some(h) = nearest(space, d, in_range_heads) {
                owner[d] = Some(h);
                admissions[d] = Admission::NearestHead;
                progress = true;
                continue;
            }
            let assigned = graph.neighbours(d).iter().copied().filter(|&j| owner[j].is_some());
            if let Some(k) = nearest(space, d, assigned) {
                owner[d] = owner[k];
                admissions[d] = Admission::NearestDevice(k);
                progress = true;
            }
        }
        pending.retain(|&d| owner[d].is_none());
        if !progress {
            // No head reachable from this group: promote its lowest id.
            let p = pending.remove(0);
            heads.insert(p);
            owner[p] = Some(p);
            admissions[p] = Admission::Head;
        }
    }

    Assignment {
        heads,
        owner: owner.into_iter().map(|o| o.expect("every device assigned")).collect(),
        admissions,
    }
}

fn update_heads<S: ClusterSpace, R: Rng>(
    space: &S,
    graph: &TopologyGraph,
    round: &Assignment,
    rng: &mut R,
) -> BTreeSet<usize> {
    let n = space.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
    for d in 0..n {
        members[round.owner[d]].push(d);
    }

    let mut next = BTreeSet::new();
    let mut empty = Vec::new();
    for &h in &round.heads {
        if members[h].len() > 1 {
            next.insert(space.medoid(&members[h]));
        } else if graph.degree(h) == 0 {
            next.insert(h);
        } else {
            empty.push(h);
        }
    }
    for h in empty {
        let candidates: Vec<usize> = (0..n)
            .filter(|d| !round.heads.contains(d) && !next.contains(d))
            .collect();
        match candidates.choose(rng) {
            Some(&c) => next.insert(c),
            None => next.insert(h),
        };
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{OptimiserConfig, ParamVector};
    use crate::rng::rng_for;
    use proptest::prelude::*;
    use rand::Rng;

    fn devices_at(points: &[(f64, f64)], r: f64) -> Vec<DeviceState> {
        points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                DeviceState::new(i, Point::new(x, y), r, ParamVector::zeros(1), OptimiserConfig::sgd(0.1, 0.0))
            })
            .collect()
    }

    fn assert_valid(c: &Clustering, graph: &TopologyGraph, cap: usize) {
        let n = graph.len();
        let mut seen = vec![false; n];
        for (idx, cl) in c.clusters.iter().enumerate() {
            assert_eq!(cl.cluster_id, idx);
            assert!(cl.members.contains(&cl.head));
            for &m in &cl.members {
                assert!(!seen[m], "device {m} in two clusters");
                seen[m] = true;
                assert_eq!(c.cluster_of[m], idx);
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert!(c.iterations <= cap);
        assert!(c.len() >= graph.components().len());
        for d in 0..n {
            let head = c.clusters[c.cluster_of[d]].head;
            match c.admissions[d] {
                Admission::Head => assert_eq!(head, d),
                Admission::NearestHead => assert!(graph.is_edge(d, head)),
                Admission::NearestDevice(k) => {
                    assert!(graph.is_edge(d, k));
                    assert_eq!(c.cluster_of[k], c.cluster_of[d]);
                }
            }
        }
    }

    fn cluster_sets(c: &Clustering) -> BTreeSet<Vec<usize>> {
        c.clusters.iter().map(|cl| cl.members.clone()).collect()
    }

    #[test]
    fn single_device() {
        let devs = devices_at(&[(5.0, 5.0)], 10.0);
        let g = TopologyGraph::snapshot(&devs);
        let c = dk_means(&devs, &g, &ClusteringConfig::new(1), &mut rng_for(0, &[]));
        assert_eq!(c.len(), 1);
        assert_eq!(c.clusters[0].head, 0);
        assert_eq!(c.clusters[0].members, vec![0]);
    }

    #[test]
    fn hand_trace_two_groups() {
        let devs = devices_at(&[(0.0, 0.0), (1.0, 0.0), (100.0, 100.0)], 10.0);
        let g = TopologyGraph::snapshot(&devs);
        let space = GeoSpace::new(devs.iter().map(|d| d.position).collect());
        let expected: BTreeSet<Vec<usize>> = [vec![0, 1], vec![2]].into_iter().collect();
        for init in [[0, 2], [1, 2]] {
            let c = dk_means_from_heads(&space, &g, init.into_iter().collect(), 5, &mut rng_for(0, &[]));
            assert_eq!(cluster_sets(&c), expected, "initial heads {init:?}");
            assert_valid(&c, &g, 5);
        }
        // Heads {0, 1}: device 2 is isolated and becomes a head; both
        // original heads have no member and no free device to move to.
        let c = dk_means_from_heads(&space, &g, [0, 1].into_iter().collect(), 5, &mut rng_for(0, &[]));
        assert_eq!(c.len(), 3);
        assert_valid(&c, &g, 5);
    }

    #[test]
    fn random_init_finds_two_groups_when_device_two_is_drawn() {
        let devs = devices_at(&[(0.0, 0.0), (1.0, 0.0), (100.0, 100.0)], 10.0);
        let g = TopologyGraph::snapshot(&devs);
        let mut hits = 0;
        for seed in 0..30 {
            let c = dk_means(&devs, &g, &ClusteringConfig::new(2), &mut rng_for(seed, &[]));
            assert_valid(&c, &g, 5);
            if c.len() == 2 {
                hits += 1;
                assert!(cluster_sets(&c).contains(&vec![0, 1]));
            }
        }
        assert!(hits >= 10);
    }

    #[test]
    fn fully_connected_converges_to_medoid() {
        let pts = [(10.0, 10.0), (12.0, 10.0), (11.0, 11.0), (30.0, 30.0), (11.0, 9.0)];
        let devs = devices_at(&pts, 100.0);
        let g = TopologyGraph::snapshot(&devs);
        for seed in 0..10 {
            let c = dk_means(&devs, &g, &ClusteringConfig::new(1), &mut rng_for(seed, &[]));
            assert_eq!(c.len(), 1);
            assert_eq!(c.clusters[0].members, vec![0, 1, 2, 3, 4]);
            // Centroid (14.8, 14.0): device 2 at (11, 11) is closest.
            assert_eq!(c.clusters[0].head, 2);
        }
    }

    #[test]
    fn chain_adoption_and_promotion() {
        // 0 - 1 - 2 in a line, spacing 8, range 10; head 0 reaches only 1.
        let devs = devices_at(&[(0.0, 0.0), (8.0, 0.0), (16.0, 0.0)], 10.0);
        let g = TopologyGraph::snapshot(&devs);
        let space = GeoSpace::new(devs.iter().map(|d| d.position).collect());
        let c = dk_means_from_heads(&space, &g, [0].into_iter().collect(), 1, &mut rng_for(0, &[]));
        assert_eq!(c.admissions[1], Admission::NearestHead);
        assert_eq!(c.admissions[2], Admission::NearestDevice(1));
        assert_eq!(c.len(), 1);

        // Head far away: the pair {0, 1} has nobody to adopt from.
        let devs = devices_at(&[(0.0, 0.0), (5.0, 0.0), (90.0, 90.0)], 10.0);
        let g = TopologyGraph::snapshot(&devs);
        let space = GeoSpace::new(devs.iter().map(|d| d.position).collect());
        let c = dk_means_from_heads(&space, &g, [2].into_iter().collect(), 1, &mut rng_for(0, &[]));
        assert_eq!(c.admissions[0], Admission::Head);
        assert_eq!(c.admissions[1], Admission::NearestHead);
        assert_valid(&c, &g, 1);
    }

    #[test]
    fn head_stability_cases() {
        let a: BTreeSet<usize> = [1, 4, 7].into_iter().collect();
        let b: BTreeSet<usize> = [1, 4, 8].into_iter().collect();
        assert!(head_stability(&a, &a.clone()));
        assert!(!head_stability(&a, &b));
        assert!(head_stability(&BTreeSet::new(), &BTreeSet::new()));
    }

    fn one_class_shards(ds_labels: &[usize]) -> Dataset {
        Dataset::new(1, 2, vec![0.0; ds_labels.len()], ds_labels.to_vec()).unwrap()
    }

    #[test]
    fn emd_two_disjoint_devices_stay_apart() {
        let ds = one_class_shards(&[0, 0, 1, 1]);
        let mut devs = devices_at(&[(0.0, 0.0), (3.0, 0.0)], 10.0);
        devs[0].shard = vec![0, 1];
        devs[1].shard = vec![2, 3];
        let g = TopologyGraph::snapshot(&devs);
        for seed in 0..5 {
            let c = dk_means_emd(&devs, &ds, &g, &ClusteringConfig::new(2), &mut rng_for(seed, &[])).unwrap();
            assert_eq!(cluster_sets(&c), [vec![0], vec![1]].into_iter().collect());
        }
    }

    #[test]
    fn emd_identical_distributions_tie_to_lowest_head() {
        let ds = one_class_shards(&[0, 1, 0, 1, 0, 1, 0, 1]);
        let mut devs = devices_at(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)], 10.0);
        for (i, d) in devs.iter_mut().enumerate() {
            d.shard = vec![2 * i, 2 * i + 1];
        }
        let g = TopologyGraph::snapshot(&devs);
        let space = EmdSpace::from_devices(&devs, &ds).unwrap();
        let c = dk_means_from_heads(&space, &g, [1, 3].into_iter().collect(), 1, &mut rng_for(0, &[]));
        // All EMDs are zero, so devices 0 and 2 pick head 1.
        assert_eq!(c.cluster_of[0], c.cluster_of[1]);
        assert_eq!(c.cluster_of[2], c.cluster_of[1]);
        assert_valid(&c, &g, 1);
    }

    #[test]
    fn emd_requires_non_empty_shards() {
        let ds = one_class_shards(&[0, 1]);
        let devs = devices_at(&[(0.0, 0.0)], 10.0);
        let g = TopologyGraph::snapshot(&devs);
        assert!(dk_means_emd(&devs, &ds, &g, &ClusteringConfig::new(1), &mut rng_for(0, &[])).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn invariants_hold(
            n in 1usize..60,
            r in prop::sample::select(vec![15.0, 30.0, 60.0]),
            k in 1usize..8,
            seed in any::<u64>(),
        ) {
            let mut rng = rng_for(seed, &[1]);
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0))).collect();
            let devs = devices_at(&pts, r);
            let g = TopologyGraph::snapshot(&devs);
            let cfg = ClusteringConfig::new(k.min(n));
            let a = dk_means(&devs, &g, &cfg, &mut rng_for(seed, &[2]));
            let b = dk_means(&devs, &g, &cfg, &mut rng_for(seed, &[2]));
            prop_assert_eq!(&a, &b);
            assert_valid(&a, &g, cfg.max_iterations);
        }
    }
}
