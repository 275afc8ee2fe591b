use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::device_consensus_error;
use crate::baselines::{cfl_evaluate, cfl_round, evaluate_devices, local_only_round, CflState, ReferenceModel};
use crate::data::{generate_blobs, load_csv, train_test_split, Dataset, Shard};
use crate::error::Result;
use crate::gossip::{run_round, RoundContext, RoundReport};
use crate::model::{evaluate, Evaluation, ModelShape, ParamVector};
use crate::rng::{rng_for, tag};
use crate::sim::{Simulation, TopologyEntry};

use super::config::{ExperimentConfig, Method};

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub method: String,
    pub round: usize,
    pub wall_step: u64,
    pub mean_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
    pub macro_f1: f64,
    pub loss: f64,
    pub consensus_error: f64,
    pub cluster_count: usize,
    pub messages: usize,
    pub lambda2_intra: f64,
    pub lambda2_inter: f64,
}

pub const METRICS_HEADER: [&str; 13] = [
    "method",
    "round",
    "wall_step",
    "mean_accuracy",
    "min_accuracy",
    "max_accuracy",
    "macro_f1",
    "loss",
    "consensus_error",
    "cluster_count",
    "messages",
    "lambda2_intra",
    "lambda2_inter",
];

impl MetricsRecord {
    fn summarise(method: &str, round: usize, wall_step: u64, evals: &[Evaluation]) -> Self {
        let n = evals.len() as f64;
        let acc = evals.iter().map(|e| e.accuracy);
        Self {
            method: method.to_string(),
            round,
            wall_step,
            mean_accuracy: evals.iter().map(|e| e.accuracy).sum::<f64>() / n,
            min_accuracy: acc.clone().fold(f64::INFINITY, f64::min),
            max_accuracy: acc.fold(f64::NEG_INFINITY, f64::max),
            macro_f1: evals.iter().map(|e| e.macro_f1).sum::<f64>() / n,
            loss: evals.iter().map(|e| e.loss).sum::<f64>() / n,
            consensus_error: 0.0,
            cluster_count: 0,
            messages: 0,
            lambda2_intra: 0.0,
            lambda2_inter: 0.0,
        }
    }
}

/// Server-side log line for centralised runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CflRoundLog {
    pub round: usize,
    pub global_accuracy: f64,
    pub weighted_accuracy: f64,
    pub wall_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyFrame {
    pub round: usize,
    pub devices: Vec<TopologyEntry>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub records: Vec<MetricsRecord>,
    pub dfl_rounds: Vec<RoundReport>,
    pub cfl_rounds: Vec<CflRoundLog>,
    pub topology: Vec<TopologyFrame>,
}

/// Data, partition and initial model for a config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub shape: ModelShape,
    pub shards: Vec<Shard>,
    pub init: ParamVector,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let seed = cfg.seed;
    let d = &cfg.data;
    let full = match &d.csv {
        Some(path) => load_csv(File::open(path)?)?,
        None => generate_blobs(
            d.class_count,
            d.per_class,
            d.input_dim,
            d.spread,
            &mut rng_for(seed, &[tag::DATA]),
        )?,
    };
    let (train, test) = train_test_split(&full, d.test_fraction, &mut rng_for(seed, &[tag::SPLIT]))?;
    let shards = cfg
        .partition
        .apply(&train, cfg.field.device_count, &mut rng_for(seed, &[tag::PARTITION]))?;
    let shape = cfg.model.shape(train.input_dim(), train.class_count());
    shape.validate()?;
    let init = shape.init_params(&mut rng_for(seed, &[tag::INIT]));
    Ok(Prepared {
        train,
        test,
        shape,
        shards,
        init,
    })
}

/// Validate, build, run every round, evaluate on the shared test set and,
/// if `cfg.output` is set, write the reports there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let p = prepare(cfg)?;
    let mut sim = Simulation::new(cfg.field.clone(), p.shards.clone(), &p.init, cfg.optimiser, cfg.seed)?;
    let mut out = RunOutput {
        config: cfg.clone(),
        records: Vec::new(),
        dfl_rounds: Vec::new(),
        cfl_rounds: Vec::new(),
        topology: Vec::new(),
    };
    match cfg.method {
        Method::Dfl => run_dfl(cfg, &p, &mut sim, &mut out)?,
        Method::Cfl => run_cfl(cfg, &p, &mut sim, &mut out)?,
        Method::LocalOnly => run_local(cfg, &p, &mut sim, &mut out)?,
    }
    if let Some(dir) = &cfg.output {
        write_outputs(&out, dir)?;
    }
    Ok(out)
}

fn run_dfl(cfg: &ExperimentConfig, p: &Prepared, sim: &mut Simulation, out: &mut RunOutput) -> Result<()> {
    let ctx = RoundContext {
        data: &p.train,
        shape: &p.shape,
        training: cfg.training,
        gossip: &cfg.gossip,
        clustering: &cfg.clustering,
        cost: cfg.cost,
        seed: cfg.seed,
    };
    let mut wall = 0u64;
    for round in 1..=cfg.rounds {
        let outcome = run_round(sim, &ctx, round)?;
        wall += outcome.report.wall_steps.max(1);
        let evals = evaluate_devices(&sim.devices, &p.test, &p.shape)?;
        let mut rec = MetricsRecord::summarise(Method::Dfl.as_str(), round, wall, &evals);
        rec.consensus_error = device_consensus_error(&sim.devices);
        rec.cluster_count = outcome.report.cluster_count;
        rec.messages = outcome.report.messages;
        rec.lambda2_intra = outcome.report.lambda2_intra;
        rec.lambda2_inter = outcome.report.lambda2_inter;
        out.records.push(rec);
        out.topology.push(TopologyFrame {
            round,
            devices: outcome.topology,
        });
        out.dfl_rounds.push(outcome.report);
    }
    Ok(())
}

fn run_cfl(cfg: &ExperimentConfig, p: &Prepared, sim: &mut Simulation, out: &mut RunOutput) -> Result<()> {
    let mut state = CflState::new(p.init.clone());
    let participants = sim.devices.iter().filter(|d| !d.shard.is_empty()).count();
    let mut wall = 0u64;
    for round in 1..=cfg.rounds {
        let cost = cfg.cost.training(&sim.devices, cfg.training.epochs) + cfg.cost.server_round;
        cfl_round(&mut state, &mut sim.devices, &p.train, &p.shape, cfg.training, cfg.seed)?;
        wall += cost.max(1);
        let e = cfl_evaluate(&state, &sim.devices, &p.test, &p.shape)?;
        let mut rec = MetricsRecord::summarise(Method::Cfl.as_str(), round, wall, &[e.global]);
        rec.messages = 2 * participants;
        rec.cluster_count = 1;
        out.records.push(rec);
        out.cfl_rounds.push(CflRoundLog {
            round,
            global_accuracy: e.global.accuracy,
            weighted_accuracy: e.weighted_accuracy,
            wall_steps: cost,
        });
    }
    Ok(())
}

fn run_local(cfg: &ExperimentConfig, p: &Prepared, sim: &mut Simulation, out: &mut RunOutput) -> Result<()> {
    let mut reference = ReferenceModel::new(p.init.clone(), cfg.optimiser, &p.train);
    let mut device_wall = vec![0u64; sim.devices.len()];
    let mut reference_wall = 0u64;
    let epochs = cfg.training.epochs as u64;
    for round in 1..=cfg.rounds {
        local_only_round(&mut sim.devices, &p.train, &p.shape, cfg.training, cfg.seed, round)?;
        let consensus = device_consensus_error(&sim.devices);
        let evals = evaluate_devices(&sim.devices, &p.test, &p.shape)?;
        for ((d, e), wall) in sim.devices.iter().zip(&evals).zip(device_wall.iter_mut()) {
            *wall += (d.shard.len() as u64 * epochs * cfg.cost.train_per_sample).max(1);
            let mut rec = MetricsRecord::summarise(Method::LocalOnly.as_str(), round, *wall, std::slice::from_ref(e));
            rec.consensus_error = consensus;
            out.records.push(rec);
        }
        reference.train_round(&p.train, &p.shape, cfg.training, cfg.seed, round)?;
        reference_wall += (p.train.len() as u64 * epochs * cfg.cost.train_per_sample).max(1);
        let e = evaluate(&reference.params, &p.shape, &p.test)?;
        out.records.push(MetricsRecord::summarise("reference", round, reference_wall, &[e]));
    }
    Ok(())
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// `metrics.csv`, `rounds.jsonl` and, for DFL, `topology.jsonl`.
pub fn write_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut csv = csv::Writer::from_path(dir.join("metrics.csv"))?;
    for r in &out.records {
        csv.serialize(r)?;
    }
    if out.records.is_empty() {
        csv.write_record(METRICS_HEADER)?;
    }
    csv.flush()?;
    match out.config.method {
        Method::Dfl => {
            write_jsonl(&dir.join("rounds.jsonl"), &out.dfl_rounds)?;
            write_jsonl(&dir.join("topology.jsonl"), &out.topology)?;
        }
        Method::Cfl => write_jsonl(&dir.join("rounds.jsonl"), &out.cfl_rounds)?,
        Method::LocalOnly => {}
    }
    fs::write(dir.join("config.toml"), out.config.to_toml_string()?)?;
    Ok(())
}
