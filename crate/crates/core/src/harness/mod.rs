//! Experiment configuration, presets, end-to-end runs and reporting.
//!
//! A run writes three files into its output directory:
//!
//! - `metrics.csv`: one [`MetricsRecord`] per row, columns in field order;
//! - `rounds.jsonl`: one JSON object per round (gossip or server log);
//! - `topology.jsonl`: positions and cluster membership per round (DFL).

mod compare;
mod config;
mod presets;
mod run;
mod spectra;

pub use compare::{
    compare_csv, compare_runs, plateau, read_metrics_csv, rounds_to_plateau_fraction, rounds_to_threshold, series,
    Comparison, RoundDelta, SeriesPoint,
};
pub use config::{DataConfig, ExperimentConfig, Method, ModelConfig};
pub use presets::{preset, PRESET_NAMES};
pub use run::{
    prepare, run_experiment, write_outputs, CflRoundLog, MetricsRecord, Prepared, RunOutput, TopologyFrame,
    METRICS_HEADER,
};
pub use spectra::{spectra_sweep, write_spectra_csv, SpectraRow};
