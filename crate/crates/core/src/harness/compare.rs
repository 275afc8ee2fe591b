use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::run::{MetricsRecord, METRICS_HEADER};

/// Per-round accuracy of a run: the mean over its non-reference rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub round: usize,
    pub accuracy: f64,
    pub wall_step: u64,
}

pub fn series(records: &[MetricsRecord]) -> Vec<SeriesPoint> {
    let mut by_round: BTreeMap<usize, (f64, usize, u64)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.method != "reference") {
        let e = by_round.entry(r.round).or_insert((0.0, 0, 0));
        e.0 += r.mean_accuracy;
        e.1 += 1;
        e.2 = e.2.max(r.wall_step);
    }
    by_round
        .into_iter()
        .map(|(round, (sum, n, wall))| SeriesPoint {
            round,
            accuracy: sum / n as f64,
            wall_step: wall,
        })
        .collect()
}

/// First point reaching `threshold` accuracy.
pub fn rounds_to_threshold(series: &[SeriesPoint], threshold: f64) -> Option<SeriesPoint> {
    series.iter().copied().find(|p| p.accuracy >= threshold)
}

/// Mean accuracy of the last `tail` points.
pub fn plateau(series: &[SeriesPoint], tail: usize) -> f64 {
    let tail = tail.clamp(1, series.len().max(1));
    let pts = &series[series.len().saturating_sub(tail)..];
    pts.iter().map(|p| p.accuracy).sum::<f64>() / pts.len().max(1) as f64
}

/// First round reaching `fraction` of the plateau.
pub fn rounds_to_plateau_fraction(series: &[SeriesPoint], fraction: f64, tail: usize) -> Option<usize> {
    rounds_to_threshold(series, fraction * plateau(series, tail)).map(|p| p.round)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundDelta {
    pub round: usize,
    pub accuracy_a: f64,
    pub accuracy_b: f64,
    /// `a − b`.
    pub delta: f64,
    pub wall_step_a: u64,
    pub wall_step_b: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub threshold: f64,
    pub deltas: Vec<RoundDelta>,
    pub rounds_to_threshold_a: Option<usize>,
    pub rounds_to_threshold_b: Option<usize>,
    pub wall_to_threshold_a: Option<u64>,
    pub wall_to_threshold_b: Option<u64>,
    /// `wall_to_threshold_a / wall_to_threshold_b`: with `b` a centralised
    /// run, how many of its rounds' worth of time `a` needed.
    pub wall_ratio: Option<f64>,
}

pub fn compare_runs(a: &[MetricsRecord], b: &[MetricsRecord], threshold: f64) -> Result<Comparison> {
    let (sa, sb) = (series(a), series(b));
    if sa.is_empty() || sb.is_empty() {
        return Err(Error::SchemaMismatch("a run has no metric rows".into()));
    }
    let b_by_round: BTreeMap<usize, SeriesPoint> = sb.iter().map(|p| (p.round, *p)).collect();
    let deltas = sa
        .iter()
        .filter_map(|pa| {
            b_by_round.get(&pa.round).map(|pb| RoundDelta {
                round: pa.round,
                accuracy_a: pa.accuracy,
                accuracy_b: pb.accuracy,
                delta: pa.accuracy - pb.accuracy,
                wall_step_a: pa.wall_step,
                wall_step_b: pb.wall_step,
            })
        })
        .collect();
    let ta = rounds_to_threshold(&sa, threshold);
    let tb = rounds_to_threshold(&sb, threshold);
    let wall_ratio = match (ta, tb) {
        (Some(x), Some(y)) if y.wall_step > 0 => Some(x.wall_step as f64 / y.wall_step as f64),
        _ => None,
    };
    Ok(Comparison {
        threshold,
        deltas,
        rounds_to_threshold_a: ta.map(|p| p.round),
        rounds_to_threshold_b: tb.map(|p| p.round),
        wall_to_threshold_a: ta.map(|p| p.wall_step),
        wall_to_threshold_b: tb.map(|p| p.wall_step),
        wall_ratio,
    })
}

/// Read a `metrics.csv`, rejecting any other column layout.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers != METRICS_HEADER {
        return Err(Error::SchemaMismatch(format!(
            "{} has columns [{}], expected [{}]",
            path.display(),
            headers.join(","),
            METRICS_HEADER.join(",")
        )));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn compare_csv(a: &Path, b: &Path, threshold: f64) -> Result<Comparison> {
    compare_runs(&read_metrics_csv(a)?, &read_metrics_csv(b)?, threshold)
}

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>5} {:>9} {:>9} {:>9} {:>10} {:>10}", "round", "acc_a", "acc_b", "delta", "wall_a", "wall_b")?;
        for d in &self.deltas {
            writeln!(
                f,
                "{:>5} {:>9.4} {:>9.4} {:>+9.4} {:>10} {:>10}",
                d.round, d.accuracy_a, d.accuracy_b, d.delta, d.wall_step_a, d.wall_step_b
            )?;
        }
        writeln!(
            f,
            "threshold {:.4}: rounds a={} b={}, wall a={} b={}, wall ratio a/b={}",
            self.threshold,
            opt(self.rounds_to_threshold_a),
            opt(self.rounds_to_threshold_b),
            opt(self.wall_to_threshold_a),
            opt(self.wall_to_threshold_b),
            opt(self.wall_ratio.map(|r| format!("{r:.3}")))
        )
    }
}
