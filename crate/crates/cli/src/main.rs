//! `hyprest`: experiment runner for the restriction toolkit.
//!
//! Every subcommand reads a key-value config (see `config::KEYS` for the
//! keys and defaults), writes CSV tables and a versioned JSON summary to the
//! output directory and exits with status 1 when its checks fail.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::Config;
use output::Output;

#[derive(Parser)]
#[command(name = "hyprest", version, about = "Numerical experiments for Fourier restriction to hyperbolic surfaces")]
struct Cli {
    /// Key-value config file; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides HYPREST_OUT and the config's `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, Debug)]
enum Command {
    /// Normal form and derivative bounds of the phase.
    ValidatePhase,
    /// Frame data and identity residuals over a grid of Σ.
    GeometryReport,
    /// Sublevel decomposition of a test function.
    Sublevel,
    /// Strip family and the geometric cover of a cap family.
    Cover,
    /// Rescaling identity and norm relations on A-strips.
    RescaleCheck,
    /// Extension operator, broad part and labels on frequency grids.
    ExtensionRun,
    /// Wave packet decomposition checks.
    WavepacketCheck,
    /// Growth of the broad-part norm in R.
    BroadExperiment,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::ValidatePhase => "validate-phase",
            Command::GeometryReport => "geometry-report",
            Command::Sublevel => "sublevel",
            Command::Cover => "cover",
            Command::RescaleCheck => "rescale-check",
            Command::ExtensionRun => "extension-run",
            Command::WavepacketCheck => "wavepacket-check",
            Command::BroadExperiment => "broad-experiment",
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let name = cli.command.name();
    let out = Output::create(output::resolve_dir(cli.out.as_deref(), &cfg), name)?;
    let seed = cli.seed;
    let outcome = match cli.command {
        Command::ValidatePhase => commands::validate_phase(&cfg, &out),
        Command::GeometryReport => commands::geometry_report(&cfg, &out, seed),
        Command::Sublevel => commands::sublevel(&cfg, &out),
        Command::Cover => commands::cover(&cfg, &out, seed),
        Command::RescaleCheck => commands::rescale_check(&cfg, &out, seed),
        Command::ExtensionRun => commands::extension_run(&cfg, &out),
        Command::WavepacketCheck => commands::wavepacket_check(&cfg, &out, seed),
        Command::BroadExperiment => commands::broad_experiment(&cfg, &out),
    }
    .with_context(|| format!("{name} failed"))?;
    let path = out.summary(&cfg, seed, outcome.pass, outcome.result)?;
    println!("{name}: {} ({})", if outcome.pass { "PASS" } else { "FAIL" }, path.display());
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
