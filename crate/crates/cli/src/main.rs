use std::io;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gdpsgd::harness::{self, compare_csv, spectra_sweep, write_spectra_csv, PRESET_NAMES};
use gdpsgd::{ExperimentConfig, Method};

#[derive(Parser)]
#[command(name = "gdpsgd", version, about = "Bilayer gossip DFL simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Named preset (see `gdpsgd presets`).
    #[arg(long)]
    preset: Option<String>,
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> Result<ExperimentConfig> {
        match (&self.preset, &self.config) {
            (Some(name), _) => Ok(harness::preset(name)?),
            (_, Some(path)) => ExperimentConfig::from_path(path).with_context(|| format!("loading {}", path.display())),
            _ => bail!("one of --preset or --config is required"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write metrics.csv, rounds.jsonl, topology.jsonl.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// dfl, cfl or local-only.
        #[arg(long)]
        method: Option<Method>,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Per-round accuracy deltas and time-to-threshold of two runs.
    Compare {
        /// Run directory or metrics CSV.
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
    },
    /// Topology-only spectral sweep, CSV on stdout.
    Spectra {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// List presets, or print one as TOML.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
}

fn metrics_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join("metrics.csv")
    } else {
        p.to_path_buf()
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run {
            source,
            seed,
            out,
            method,
            rounds,
        } => {
            let mut cfg = source.load()?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(m) = method {
                cfg.method = m;
            }
            if let Some(r) = rounds {
                cfg.rounds = r;
            }
            if out.is_some() {
                cfg.output = out;
            }
            let run = gdpsgd::run_experiment(&cfg)?;
            let last = harness::series(&run.records);
            if let Some(p) = last.last() {
                println!(
                    "{} seed={} method={} rounds={} accuracy={:.4} wall_step={}",
                    if cfg.name.is_empty() { "config" } else { &cfg.name },
                    cfg.seed,
                    cfg.method,
                    p.round,
                    p.accuracy,
                    p.wall_step
                );
            }
            if let Some(dir) = &cfg.output {
                println!("wrote {}", dir.display());
            }
        }
        Command::Compare { a, b, threshold } => {
            let c = compare_csv(&metrics_path(&a), &metrics_path(&b), threshold)?;
            print!("{c}");
        }
        Command::Spectra { source, seed, rounds } => {
            let mut cfg = source.load()?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(r) = rounds {
                cfg.rounds = r;
            }
            write_spectra_csv(&spectra_sweep(&cfg)?, io::stdout().lock())?;
        }
        Command::Presets { show } => match show {
            Some(name) => print!("{}", harness::preset(&name)?.to_toml_string()?),
            None => {
                for name in PRESET_NAMES {
                    println!("{name}");
                }
            }
        },
    }
    Ok(())
}
