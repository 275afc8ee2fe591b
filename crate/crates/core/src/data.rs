//! Datasets, device partitioning and label-distribution distance.
//!
//! A [`Dataset`] stores features row-major. Device shards are sorted index
//! lists into a shared dataset, so partition properties (disjointness,
//! coverage) are plain index-set checks.

use std::io::Read;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Indices of the samples a device owns, ascending.
pub type Shard = Vec<usize>;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    input_dim: usize,
    class_count: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(
        input_dim: usize,
        class_count: usize,
        features: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if input_dim == 0 || class_count == 0 {
            return Err(Error::InvalidInput(
                "input_dim and class_count must be positive".into(),
            ));
        }
        if features.len() != labels.len() * input_dim {
            return Err(Error::DimensionMismatch {
                context: "dataset features",
                expected: labels.len() * input_dim,
                actual: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::InvalidInput(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric { layer: "dataset features" });
        }
        Ok(Self {
            input_dim,
            class_count,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    /// Copy the given rows into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.features(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            input_dim: self.input_dim,
            class_count: self.class_count,
            features,
            labels,
        }
    }

    /// Sample indices grouped by class, ascending within each class.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.class_count];
        for (i, &l) in self.labels.iter().enumerate() {
            by_class[l].push(i);
        }
        by_class
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// One isotropic Gaussian blob per class.
///
/// Class means are drawn from a standard normal per coordinate; samples are
/// `mean + spread * N(0, I)`. Samples are laid out class by class.
pub fn generate_blobs<R: Rng>(
    class_count: usize,
    per_class: usize,
    input_dim: usize,
    spread: f64,
    rng: &mut R,
) -> Result<Dataset> {
    if class_count == 0 || per_class == 0 || input_dim == 0 {
        return Err(Error::InvalidInput("blob counts must be positive".into()));
    }
    if !(spread.is_finite() && spread >= 0.0) {
        return Err(Error::InvalidInput(format!("invalid spread {spread}")));
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let means: Vec<Vec<f64>> = (0..class_count)
        .map(|_| (0..input_dim).map(|_| std_normal.sample(rng)).collect())
        .collect();

    let n = class_count * per_class;
    let mut features = Vec::with_capacity(n * input_dim);
    let mut labels = Vec::with_capacity(n);
    for (class, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            for &m in mean {
                // Draw even when spread == 0 so the stream layout is spread-independent.
                let z = std_normal.sample(rng);
                features.push(m + spread * z);
            }
            labels.push(class);
        }
    }
    Dataset::new(input_dim, class_count, features, labels)
}

/// Stratified split; returns `(train, test)`.
pub fn train_test_split<R: Rng>(
    ds: &Dataset,
    test_fraction: f64,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidInput(format!(
            "test fraction {test_fraction} outside [0, 1)"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut idx in ds.indices_by_class() {
        idx.shuffle(rng);
        let n_test = (idx.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&idx[..n_test]);
        train.extend_from_slice(&idx[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    Iid,
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub mode: PartitionMode,
    /// Dirichlet concentration; ignored for IID.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    1.0
}

impl PartitionSpec {
    pub fn iid() -> Self {
        Self {
            mode: PartitionMode::Iid,
            alpha: default_alpha(),
        }
    }

    pub fn dirichlet(alpha: f64) -> Self {
        Self {
            mode: PartitionMode::Dirichlet,
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == PartitionMode::Dirichlet && !(self.alpha.is_finite() && self.alpha > 0.0)
        {
            return Err(Error::InvalidConfig(format!(
                "dirichlet alpha must be > 0, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn apply<R: Rng>(&self, ds: &Dataset, device_count: usize, rng: &mut R) -> Result<Vec<Shard>> {
        self.validate()?;
        match self.mode {
            PartitionMode::Iid => partition_iid(ds, device_count, rng),
            PartitionMode::Dirichlet => partition_dirichlet(ds, device_count, self.alpha, rng),
        }
    }
}

/// Balanced IID split: every class is shuffled and dealt round-robin, with
/// the dealing position carried across classes so shard sizes also differ
/// by at most one.
pub fn partition_iid<R: Rng>(ds: &Dataset, device_count: usize, rng: &mut R) -> Result<Vec<Shard>> {
    if device_count == 0 {
        return Err(Error::InvalidInput("device_count must be positive".into()));
    }
    let min_class = ds
        .class_counts()
        .into_iter()
        .filter(|&c| c > 0)
        .min()
        .unwrap_or(0);
    if device_count > min_class {
        return Err(Error::Sizing {
            requested: device_count,
            available: min_class,
        });
    }
    let mut shards = vec![Vec::new(); device_count];
    let mut slot = 0usize;
    for mut idx in ds.indices_by_class() {
        idx.shuffle(rng);
        for i in idx {
            shards[slot % device_count].push(i);
            slot += 1;
        }
    }
    shards.iter_mut().for_each(|s| s.sort_unstable());
    Ok(shards)
}

/// Label-skewed split: for each class, a Dirichlet(alpha, ..., alpha) draw
/// over devices decides what fraction of that class each device receives.
///
/// Fractions are turned into integer counts by largest-remainder rounding
/// (ties to the lower device id). A device that ends up with no samples
/// takes one sample (the highest index) from the currently largest shard.
pub fn partition_dirichlet<R: Rng>(
    ds: &Dataset,
    device_count: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Vec<Shard>> {
    if device_count == 0 {
        return Err(Error::InvalidInput("device_count must be positive".into()));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be > 0, got {alpha}")));
    }
    if ds.len() < device_count {
        return Err(Error::Sizing {
            requested: device_count,
            available: ds.len(),
        });
    }
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::InvalidInput(format!("gamma({alpha}): {e}")))?;

    let mut shards = vec![Vec::new(); device_count];
    for mut idx in ds.indices_by_class() {
        if idx.is_empty() {
            continue;
        }
        idx.shuffle(rng);
        let draws: Vec<f64> = (0..device_count).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        let proportions: Vec<f64> = if total > 0.0 && total.is_finite() {
            draws.iter().map(|d| d / total).collect()
        } else {
            // Every gamma draw underflowed: hand the class to one device.
            let mut p = vec![0.0; device_count];
            p[rng.random_range(0..device_count)] = 1.0;
            p
        };
        let counts = largest_remainder(&proportions, idx.len());
        let mut start = 0;
        for (device, &c) in counts.iter().enumerate() {
            shards[device].extend_from_slice(&idx[start..start + c]);
            start += c;
        }
    }

    for s in shards.iter_mut() {
        s.sort_unstable();
    }
    while let Some(empty) = shards.iter().position(|s| s.is_empty()) {
        let donor = largest_shard(&shards);
        let sample = shards[donor].pop().expect("donor shard is non-empty");
        shards[empty].push(sample);
    }
    Ok(shards)
}

fn largest_shard(shards: &[Shard]) -> usize {
    let mut best = 0;
    for (i, s) in shards.iter().enumerate() {
        if s.len() > shards[best].len() {
            best = i;
        }
    }
    best
}

/// Round `proportions * total` to integers that sum to `total`.
pub fn largest_remainder(proportions: &[f64], total: usize) -> Vec<usize> {
    let scaled: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = scaled.iter().map(|s| s.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    // Descending remainder, ascending index on ties.
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Class proportions of a shard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    proportions: Vec<f64>,
}

impl LabelDistribution {
    pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

    pub fn new(proportions: Vec<f64>) -> Result<Self> {
        let d = Self { proportions };
        if !d.is_simplex() {
            return Err(Error::InvalidInput(
                "label distribution must be non-negative and sum to 1".into(),
            ));
        }
        Ok(d)
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    pub fn is_simplex(&self) -> bool {
        let sum: f64 = self.proportions.iter().sum();
        !self.proportions.is_empty()
            && self.proportions.iter().all(|&p| p >= 0.0 && p.is_finite())
            && (sum - 1.0).abs() <= Self::SIMPLEX_TOLERANCE
    }

    /// Unweighted mean of several distributions over the same classes.
    pub fn mean<'a, I>(dists: I) -> Option<LabelDistribution>
    where
        I: IntoIterator<Item = &'a LabelDistribution>,
    {
        let mut acc: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for d in dists {
            if acc.is_empty() {
                acc = vec![0.0; d.proportions.len()];
            }
            for (a, p) in acc.iter_mut().zip(&d.proportions) {
                *a += p;
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        acc.iter_mut().for_each(|a| *a /= n as f64);
        Some(LabelDistribution { proportions: acc })
    }
}

pub fn label_distribution(ds: &Dataset, shard: &[usize]) -> Result<LabelDistribution> {
    if shard.is_empty() {
        return Err(Error::EmptyShard);
    }
    let mut counts = vec![0usize; ds.class_count()];
    for &i in shard {
        counts[ds.label(i)] += 1;
    }
    let n = shard.len() as f64;
    Ok(LabelDistribution {
        proportions: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

/// Earth mover's distance between two label distributions with ground
/// distance `|i - j|` over class indices: the L1 distance between CDFs.
pub fn emd(p: &LabelDistribution, q: &LabelDistribution) -> Result<f64> {
    if p.proportions.len() != q.proportions.len() {
        return Err(Error::DimensionMismatch {
            context: "emd",
            expected: p.proportions.len(),
            actual: q.proportions.len(),
        });
    }
    let mut cdf_gap = 0.0;
    let mut total = 0.0;
    let k = p.proportions.len();
    for i in 0..k.saturating_sub(1) {
        cdf_gap += p.proportions[i] - q.proportions[i];
        total += cdf_gap.abs();
    }
    Ok(total)
}

/// Load a dataset from CSV rows of `features..., label`.
///
/// A first row that does not parse as numbers is treated as a header.
/// `class_count` is one more than the largest label seen.
pub fn load_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut input_dim: Option<usize> = None;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.is_empty() || (record.len() == 1 && record[0].is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if row == 0 => continue,
            Err(e) => {
                return Err(Error::InvalidInput(format!("csv row {}: {e}", row + 1)));
            }
        };
        if values.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "csv row {}: need at least one feature and a label",
                row + 1
            )));
        }
        let dim = values.len() - 1;
        match input_dim {
            None => input_dim = Some(dim),
            Some(d) if d != dim => {
                return Err(Error::DimensionMismatch {
                    context: "csv row width",
                    expected: d,
                    actual: dim,
                })
            }
            _ => {}
        }
        let label = values[dim];
        if label < 0.0 || label.fract() != 0.0 {
            return Err(Error::InvalidInput(format!(
                "csv row {}: label {label} is not a class index",
                row + 1
            )));
        }
        features.extend_from_slice(&values[..dim]);
        labels.push(label as usize);
    }
    let input_dim = input_dim.ok_or_else(|| Error::InvalidInput("csv has no data rows".into()))?;
    let class_count = labels.iter().max().map_or(1, |m| m + 1).max(2);
    Dataset::new(input_dim, class_count, features, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_for;
    use proptest::prelude::*;
    use rand::Rng;
    use std::collections::BTreeSet;

    fn blobs(class_count: usize, per_class: usize, seed: u64) -> Dataset {
        generate_blobs(class_count, per_class, 4, 0.5, &mut rng_for(seed, &[])).unwrap()
    }

    fn assert_partition(ds: &Dataset, shards: &[Shard]) {
        let mut seen = BTreeSet::new();
        for s in shards {
            for &i in s {
                assert!(seen.insert(i), "sample {i} in two shards");
            }
        }
        assert_eq!(seen.len(), ds.len());
        assert_eq!(seen.iter().copied().collect::<Vec<_>>(), ds.all_indices());
    }

    /// Optimal transport on a line by the north-west corner rule, which is
    /// optimal for the monotone ground cost |i - j|.
    fn transport_oracle(p: &[f64], q: &[f64]) -> f64 {
        let (mut a, mut b) = (p.to_vec(), q.to_vec());
        let (mut i, mut j) = (0, 0);
        let mut cost = 0.0;
        while i < a.len() && j < b.len() {
            let m = a[i].min(b[j]);
            cost += m * (i as f64 - j as f64).abs();
            a[i] -= m;
            b[j] -= m;
            if a[i] <= 1e-15 {
                i += 1;
            } else {
                j += 1;
            }
        }
        cost
    }

    fn dist(p: &[f64]) -> LabelDistribution {
        LabelDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn blobs_are_balanced() {
        let ds = generate_blobs(10, 600, 8, 1.0, &mut rng_for(1, &[])).unwrap();
        assert_eq!(ds.len(), 6000);
        assert_eq!(ds.class_counts(), vec![600; 10]);
    }

    #[test]
    fn blobs_are_deterministic() {
        assert_eq!(blobs(3, 20, 5), blobs(3, 20, 5));
        assert_ne!(blobs(3, 20, 5), blobs(3, 20, 6));
    }

    #[test]
    fn zero_spread_collapses_to_means() {
        let ds = generate_blobs(3, 5, 4, 0.0, &mut rng_for(2, &[])).unwrap();
        for class in ds.indices_by_class() {
            let first = ds.features(class[0]).to_vec();
            for &i in &class {
                assert_eq!(ds.features(i), first.as_slice());
            }
        }
    }

    #[test]
    fn iid_thirty_devices() {
        let ds = generate_blobs(10, 600, 4, 1.0, &mut rng_for(3, &[])).unwrap();
        let shards = partition_iid(&ds, 30, &mut rng_for(3, &[1])).unwrap();
        assert_partition(&ds, &shards);
        for s in &shards {
            assert_eq!(s.len(), 200);
            let sub = ds.subset(s);
            assert_eq!(sub.class_counts(), vec![20; 10]);
        }
    }

    #[test]
    fn iid_single_device_gets_everything() {
        let ds = blobs(3, 7, 1);
        let shards = partition_iid(&ds, 1, &mut rng_for(0, &[])).unwrap();
        assert_eq!(shards, vec![ds.all_indices()]);
    }

    #[test]
    fn iid_rejects_too_many_devices() {
        let ds = blobs(3, 7, 1);
        assert!(matches!(
            partition_iid(&ds, 8, &mut rng_for(0, &[])),
            Err(Error::Sizing { requested: 8, available: 7 })
        ));
    }

    #[test]
    fn dirichlet_huge_alpha_is_near_uniform() {
        let ds = generate_blobs(10, 600, 4, 1.0, &mut rng_for(4, &[])).unwrap();
        let shards = partition_dirichlet(&ds, 10, 1e9, &mut rng_for(4, &[1])).unwrap();
        assert_partition(&ds, &shards);
        for s in &shards {
            let d = label_distribution(&ds, s).unwrap();
            for &p in d.proportions() {
                assert!((p - 0.1).abs() <= 0.05 * 0.1 + 1e-12, "proportion {p}");
            }
        }
    }

    #[test]
    fn dirichlet_small_alpha_is_skewed() {
        // Regression value: with seed 11 the most concentrated device holds
        // more than 60% of its samples in one class.
        let ds = generate_blobs(10, 100, 4, 1.0, &mut rng_for(11, &[])).unwrap();
        let shards = partition_dirichlet(&ds, 10, 0.1, &mut rng_for(11, &[1])).unwrap();
        assert_partition(&ds, &shards);
        let max_share = shards
            .iter()
            .map(|s| {
                label_distribution(&ds, s)
                    .unwrap()
                    .proportions()
                    .iter()
                    .cloned()
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        assert!(max_share > 0.6, "max single-class share {max_share}");
    }

    #[test]
    fn dirichlet_repairs_empty_shards() {
        // 12 samples over 10 devices at tiny alpha leaves most devices empty
        // before repair.
        let ds = blobs(2, 6, 9);
        let shards = partition_dirichlet(&ds, 10, 0.01, &mut rng_for(9, &[1])).unwrap();
        assert_partition(&ds, &shards);
        assert!(shards.iter().all(|s| !s.is_empty()));
    }

    #[test]
    fn largest_remainder_sums_to_total() {
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[0.2, 0.3, 0.5], 10), vec![2, 3, 5]);
        assert_eq!(largest_remainder(&[1.0 / 3.0; 3], 2), vec![1, 1, 0]);
    }

    #[test]
    fn label_distribution_examples() {
        let ds = Dataset::new(1, 2, vec![0.0; 4], vec![0, 0, 1, 1]).unwrap();
        assert_eq!(label_distribution(&ds, &[0, 1, 2, 3]).unwrap().proportions(), &[0.5, 0.5]);
        assert_eq!(label_distribution(&ds, &[2, 3]).unwrap().proportions(), &[0.0, 1.0]);
        assert!(matches!(label_distribution(&ds, &[]), Err(Error::EmptyShard)));
    }

    #[test]
    fn emd_examples() {
        let p = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(emd(&p, &p).unwrap(), 0.0);
        assert_eq!(emd(&dist(&[1.0, 0.0]), &dist(&[0.0, 1.0])).unwrap(), 1.0);
        let a = dist(&[0.7, 0.3]);
        let b = dist(&[0.3, 0.7]);
        let expected = transport_oracle(a.proportions(), b.proportions());
        assert!((expected - 0.4).abs() < 1e-12);
        assert!((emd(&a, &b).unwrap() - expected).abs() < 1e-12);
        assert!(emd(&a, &dist(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn emd_metric_properties_and_oracle() {
        let mut rng = rng_for(1000, &[]);
        let mut random_dist = |k: usize| {
            let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            LabelDistribution::new(raw.into_iter().map(|x| x / s).collect()).unwrap()
        };
        for _ in 0..1000 {
            let (p, q, r) = (random_dist(6), random_dist(6), random_dist(6));
            let pq = emd(&p, &q).unwrap();
            let qp = emd(&q, &p).unwrap();
            assert!(pq >= 0.0);
            assert!((pq - qp).abs() < 1e-12);
            assert!(pq > 0.0);
            let pr = emd(&p, &r).unwrap();
            let rq = emd(&r, &q).unwrap();
            assert!(pq <= pr + rq + 1e-12);
            let oracle = transport_oracle(p.proportions(), q.proportions());
            assert!((pq - oracle).abs() < 1e-9, "{pq} vs {oracle}");
        }
    }

    #[test]
    fn csv_loader_skips_header() {
        let text = "x0,x1,label\n0.5,1.0,0\n-1,2,2\n";
        let ds = load_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.input_dim(), 2);
        assert_eq!(ds.class_count(), 3);
        assert_eq!(ds.features(1), &[-1.0, 2.0]);
        assert_eq!(ds.label(1), 2);
    }

    #[test]
    fn csv_loader_rejects_ragged_rows() {
        assert!(load_csv("1,2,0\n1,0\n".as_bytes()).is_err());
        assert!(load_csv("1,2,0.5\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn partitions_are_exact_and_deterministic(
            devices in 1usize..12,
            alpha in 0.05f64..20.0,
            seed in any::<u64>(),
            dirichlet in any::<bool>(),
        ) {
            let ds = blobs(4, 12, seed);
            let spec = if dirichlet { PartitionSpec::dirichlet(alpha) } else { PartitionSpec::iid() };
            let a = spec.apply(&ds, devices, &mut rng_for(seed, &[7])).unwrap();
            let b = spec.apply(&ds, devices, &mut rng_for(seed, &[7])).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.len(), devices);
            assert_partition(&ds, &a);
            for s in &a {
                let d = label_distribution(&ds, s).unwrap();
                prop_assert!(d.is_simplex());
            }
        }
    }
}
