//! `modeconn`: experiment runner for the mode-connectivity library.
//!
//! Every subcommand writes a long-format CSV and a JSON manifest into the
//! output directory and exits with status 0 only when all of its in-run
//! assertions pass (1 when some fail, 2 on errors).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use config::{resolve, ExperimentConfig, Overrides};
use output::RunOutput;

#[derive(Parser, Debug)]
#[command(name = "modeconn", version, about = "Mode-connectivity experiments on neural-network minima")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON file with `seed`, `out_dir`, `trials` and a `params` block.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Base seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for trial loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory; overrides the config file.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Frequency of shared centers among random minima vs the analytic bound.
    McConnectivity,
    /// Normalized geodesic distance against width.
    NgdSweep,
    /// Center connected to k minima, with pairwise and spoke loss curves.
    StarDemo,
    /// Depth-2 linear pair without a 2-piece path, and its 3-piece escape.
    Counterexample,
    /// Train MLPs and save checkpoints.
    Train,
    /// Find a center for trained networks.
    CenterFind,
    /// Loss along a segment or fold line between checkpoints.
    Barrier,
}

fn execute<P>(
    name: &str,
    default_trials: usize,
    overrides: &Overrides,
    run: fn(&ExperimentConfig<P>, &mut RunOutput) -> Result<()>,
) -> Result<bool>
where
    P: DeserializeOwned + Serialize + Default,
{
    let cfg = resolve::<P>(name, default_trials, overrides)?;
    let mut out = RunOutput::new(name, &cfg.out_dir)?;
    run(&cfg, &mut out)?;
    out.finish(&cfg)
}

fn dispatch(cli: &Cli) -> Result<bool> {
    use commands::*;
    let o = Overrides {
        config: cli.config.as_deref(),
        seed: cli.seed,
        out_dir: cli.out_dir.as_deref(),
    };
    match cli.command {
        Command::McConnectivity => execute("mc_connectivity", 10_000, &o, mc_connectivity::run),
        Command::NgdSweep => execute("ngd_sweep", 2_000, &o, ngd_sweep::run),
        Command::StarDemo => execute("star_demo", 1, &o, star_demo::run),
        Command::Counterexample => execute("counterexample", 1_000, &o, counterexample::run),
        Command::Train => execute("train", 1, &o, network::run_train),
        Command::CenterFind => execute("center_find", 1, &o, center_find::run),
        Command::Barrier => execute("barrier", 1, &o, network::run_barrier),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::error!("thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            log::error!("some in-run assertions failed; see the manifest");
            ExitCode::from(1)
        }
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(2)
        }
    }
}
