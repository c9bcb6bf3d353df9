//! `frontlab` command-line driver. Every subcommand reads one TOML or JSON
//! config, writes CSV/JSON artifacts into `--out`, and records a manifest
//! whose echoed config replays the run.

mod commands;
mod config;
mod defaults;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{config_hash, Artifacts, Manifest, MANIFEST};

#[derive(Debug, Parser)]
#[command(name = "frontlab", version, about = "Traveling-front experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML or JSON config; a manifest from an earlier run also works.
    #[arg(long, global = true, env = "FRONTLAB_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "FRONTLAB_OUT", default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed (voting-mc only).
    #[arg(long, global = true, env = "FRONTLAB_SEED")]
    seed: Option<u64>,
    /// Worker threads for Monte Carlo paths and sweeps; all cores when absent.
    #[arg(long, global = true, env = "FRONTLAB_WORKERS")]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Minimal speeds of a list of models.
    Speed,
    /// Minimal-speed profile, wave and decay classification.
    Wave,
    /// One PDE run: trace, snapshots and diagnostics.
    Simulate,
    /// Log-correction fit of a simulated front trace.
    FrontFit,
    /// Diagnostics of the snapshots of a simulated trajectory.
    Diagnose,
    /// Monte Carlo voting estimate, optionally next to the PDE.
    VotingMc,
    /// Parallel runs over `χ` and equations.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Speed => "speed",
            Command::Wave => "wave",
            Command::Simulate => "simulate",
            Command::FrontFit => "front-fit",
            Command::Diagnose => "diagnose",
            Command::VotingMc => "voting-mc",
            Command::Sweep => "sweep",
        }
    }
}

fn execute<T, F>(cli: &Cli, adjust: impl FnOnce(&mut T), body: F) -> CliResult<()>
where
    T: Serialize + DeserializeOwned,
    F: FnOnce(&T, &mut Artifacts) -> CliResult<u64> + Send,
    T: Sync,
{
    let name = cli.command.name();
    let path: &Path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg: T = config::load(path, name)?;
    adjust(&mut cfg);
    let echo = serde_json::to_value(&cfg).expect("configs serialize");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let mut out = Artifacts::create(&cli.out)?;
    let start = Instant::now();
    let result = pool.install(|| body(&cfg, &mut out));
    let manifest = Manifest {
        tool: "frontlab",
        tool_version: env!("CARGO_PKG_VERSION"),
        subcommand: name,
        config_hash: config_hash(&echo),
        config: &echo,
        outputs: out.files(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        steps: *result.as_ref().unwrap_or(&0),
        status: if result.is_ok() { "ok" } else { "failed" },
        error: result.as_ref().err().map(|e| e.to_string()),
    };
    let path = out.root().join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(CliError::io(&path))?;
    result.map(|_| ())
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Speed => execute(cli, |_: &mut config::SpeedConfig| {}, commands::speed),
        Command::Wave => execute(cli, |_: &mut config::WaveConfig| {}, commands::wave),
        Command::Simulate => execute(
            cli,
            |c: &mut config::SimulateConfig| c.run.dt = Some(c.run.dt()),
            commands::simulate,
        ),
        Command::FrontFit => execute(
            cli,
            |_: &mut config::FrontFitConfig| {},
            commands::front_fit,
        ),
        Command::Diagnose => execute(cli, |_: &mut config::DiagnoseConfig| {}, commands::diagnose),
        Command::VotingMc => execute(
            cli,
            |c: &mut config::VotingConfig| {
                if let Some(s) = seed {
                    c.seed = s;
                }
            },
            commands::voting_mc,
        ),
        Command::Sweep => execute(
            cli,
            |c: &mut config::SweepConfig| c.base.dt = Some(c.base.dt()),
            commands::sweep,
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("frontlab {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
