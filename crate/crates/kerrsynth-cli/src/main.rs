//! Experiment runner for the qubit-mediated Kerr-gate synthesis library.
//!
//! Each subcommand reads an optional JSON config, applies flag overrides,
//! writes `report.json` plus CSV artifacts into the output directory, and
//! exits nonzero if any tolerance check fails.

mod config;
mod runners;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{Experiment, ExperimentConfig, OUT_ENV};

#[derive(Parser)]
#[command(name = "kerrsynth", version, about = "Nonlinear-gate synthesis experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON config file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default: $KERRSYNTH_OUT or ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Per-step interaction strength override.
    #[arg(long, global = true)]
    tau: Option<f64>,

    /// Per-step transmittance override (1.0 = lossless).
    #[arg(long, global = true)]
    eta: Option<f64>,

    /// Fock truncation override.
    #[arg(long, global = true)]
    nmax: Option<usize>,

    /// Worker thread cap (0 = library default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Self-Kerr evolution of a coherent state: fidelities, energy loss,
    /// Wigner grids and negative-region counts.
    SelfKerr,
    /// Cross-Kerr interaction-strength scan: negativity vs Gaussian
    /// negativity, ideal / simulated / lossy.
    CrossKerr,
    /// Control-Z on the two-qubit subspace: conditional and deterministic
    /// fidelity, output entanglement, convergence in R.
    ControlZ,
    /// Fidelity-deficit scaling probe over repetition counts.
    Scaling,
    /// Seeded library-wide invariant sweeps.
    Props,
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more tolerance checks failed (see report.json)");
            ExitCode::FAILURE
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<bool> {
    let cli = Cli::parse();
    kerrsynth::parallel::configure_threads(cli.threads);

    let experiment = match cli.command {
        Command::SelfKerr => Experiment::SelfKerr,
        Command::CrossKerr => Experiment::CrossKerr,
        Command::ControlZ => Experiment::ControlZ,
        Command::Scaling => Experiment::Scaling,
        Command::Props => Experiment::Props,
    };
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::defaults(experiment),
    };
    if cfg.experiment != experiment {
        anyhow::bail!(
            "config is for {:?} but the {:?} subcommand was invoked",
            cfg.experiment,
            experiment
        );
    }
    if cli.tau.is_some() {
        cfg.tau = cli.tau;
    }
    if cli.eta.is_some() {
        cfg.eta = cli.eta;
    }
    if cli.nmax.is_some() {
        cfg.n_max = cli.nmax;
    }
    cfg.validate()?;

    let out_dir = cli
        .out
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out_dir)?;

    match experiment {
        Experiment::SelfKerr => runners::run_self_kerr(&cfg, &out_dir),
        Experiment::CrossKerr => runners::run_cross_kerr(&cfg, &out_dir),
        Experiment::ControlZ => runners::run_control_z(&cfg, &out_dir),
        Experiment::Scaling => runners::run_scaling(&cfg, &out_dir),
        Experiment::Props => runners::run_props(&cfg, &out_dir),
    }
}
