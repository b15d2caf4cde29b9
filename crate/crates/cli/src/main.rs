//! `lookaround` — experiment driver for the optimizer laboratory.
//!
//! Each subcommand runs one experiment kind. Configuration comes from an
//! optional TOML file (see configs/ for examples) with flag overrides; the
//! fully-resolved config is echoed into the output directory alongside the
//! CSV artifacts. Column layouts are documented in docs/csv-schemas.md.

mod artifact;
mod config;
mod run;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::artifact::{prepare_out_dir, write_atomic};
use crate::config::{parse_config, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(
    name = "lookaround",
    about = "Numerical laboratory for replica-averaging optimizers",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonFlags {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Top-level seed; required here or in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $LOOKAROUND_OUT_ROOT or ./runs, plus a
    /// kind-and-seed subdirectory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Write into an existing output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Verify closed-form steady-state variances against their recursions.
    QuadFixedPoints(CommonFlags),
    /// Simulate the noisy quadratic and compare moments with theory.
    QuadMonteCarlo(CommonFlags),
    /// Convergence rate vs condition number, γ optimized per point.
    RateSweep(CommonFlags),
    /// One training run with per-synchronization logging.
    Train(CommonFlags),
    /// Data-augmentation × weight-averaging 2×2 ablation grid.
    Ablation(CommonFlags),
    /// Accuracy as a function of the replica count d.
    SweepD(CommonFlags),
    /// Accuracy as a function of the synchronization period k.
    SweepK(CommonFlags),
    /// Loss surface over the plane spanned by the final replica trio.
    Landscape(CommonFlags),
    /// Naive weight averaging collapse vs replica-average locality.
    SoupsCollapse(CommonFlags),
}

impl Command {
    fn parts(&self) -> (&'static str, &CommonFlags) {
        match self {
            Command::QuadFixedPoints(f) => ("quad-fixed-points", f),
            Command::QuadMonteCarlo(f) => ("quad-monte-carlo", f),
            Command::RateSweep(f) => ("rate-sweep", f),
            Command::Train(f) => ("train", f),
            Command::Ablation(f) => ("ablation", f),
            Command::SweepD(f) => ("sweep-d", f),
            Command::SweepK(f) => ("sweep-k", f),
            Command::Landscape(f) => ("landscape", f),
            Command::SoupsCollapse(f) => ("soups-collapse", f),
        }
    }
}

fn execute(kind: &str, flags: &CommonFlags) -> Result<String> {
    let over = Overrides {
        seed: flags.seed,
        out: flags.out.clone(),
        workers: flags.workers,
    };
    let cfg: ExperimentConfig = parse_config(kind, flags.config.as_deref(), &over)?;

    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global()
            .context("cannot size the worker pool")?;
    }

    prepare_out_dir(&cfg.out, flags.force)?;

    // Echo the fully-resolved config before running: any artifact can be
    // regenerated from this snapshot alone.
    let snapshot = cfg.to_toml()?;
    write_atomic(&cfg.out, "config.toml", snapshot.as_bytes())?;
    let as_value: toml::Value = toml::from_str(&snapshot)?;
    write_atomic(
        &cfg.out,
        "config.json",
        serde_json::to_string_pretty(&as_value)?.as_bytes(),
    )?;

    run::run(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = cli.command.parts();
    match execute(kind, flags) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
