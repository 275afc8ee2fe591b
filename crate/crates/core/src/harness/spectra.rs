//! Topology-only sweep: mobility and clustering without training.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::{averaging_time_bounds, layer_lambdas, spectral_report};
use crate::clustering::cluster_devices;
use crate::error::Result;
use crate::rng::{rng_for, tag};
use crate::sim::Simulation;

use super::config::ExperimentConfig;
use super::run::prepare;

const SWEEP_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraRow {
    pub round: usize,
    pub edges: usize,
    pub components: usize,
    pub lambda_2: f64,
    pub lambda_n: f64,
    pub rho_mixing: f64,
    pub laplacian_lambda_2: f64,
    pub rho_laplacian: f64,
    pub cluster_count: usize,
    pub lambda2_intra: f64,
    pub lambda2_inter: f64,
    /// Averaging-time bounds at ε = 1e-3; empty when the snapshot is
    /// disconnected.
    pub t_ave_lower: Option<f64>,
    pub t_ave_upper: Option<f64>,
}

/// Per-round spectra of the whole snapshot and of both gossip layers.
/// Uses the same placement, mobility and clustering streams as a DFL run.
pub fn spectra_sweep(cfg: &ExperimentConfig) -> Result<Vec<SpectraRow>> {
    cfg.validate()?;
    let p = prepare(cfg)?;
    let mut sim = Simulation::new(cfg.field.clone(), p.shards, &p.init, cfg.optimiser, cfg.seed)?;
    let mut rows = Vec::with_capacity(cfg.rounds);
    for round in 1..=cfg.rounds {
        let graph = sim.snapshot();
        let clustering = cluster_devices(
            &sim.devices,
            &p.train,
            &graph,
            &cfg.clustering,
            &mut rng_for(cfg.seed, &[tag::CLUSTERING, round as u64]),
        )?;
        let s = spectral_report(graph.mixing())?;
        let (lambda2_intra, lambda2_inter) = layer_lambdas(&graph, &clustering)?;
        let bounds = if s.contracting && s.lambda_2 > 0.0 {
            averaging_time_bounds(SWEEP_EPSILON, s.lambda_2).ok()
        } else {
            None
        };
        rows.push(SpectraRow {
            round,
            edges: graph.edge_count(),
            components: graph.components().len(),
            lambda_2: s.lambda_2,
            lambda_n: s.lambda_n,
            rho_mixing: s.rho_mixing,
            laplacian_lambda_2: s.laplacian_lambda_2,
            rho_laplacian: s.rho_laplacian,
            cluster_count: clustering.len(),
            lambda2_intra,
            lambda2_inter,
            t_ave_lower: bounds.map(|b| b.0),
            t_ave_upper: bounds.map(|b| b.1),
        });
        for _ in 0..sim.field.steps_per_round {
            sim.step()?;
        }
    }
    Ok(rows)
}

pub fn write_spectra_csv<W: Write>(rows: &[SpectraRow], w: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r)?;
    }
    csv.flush()?;
    Ok(())
}
