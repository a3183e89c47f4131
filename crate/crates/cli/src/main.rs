//! `anongcn`: batch pipelines over the core library.

mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{attack, defend, experiment, infer, ingest, report, train};
use run::{ConfigFile, Outcome};

#[derive(Parser, Debug)]
#[command(
    name = "anongcn",
    version,
    about = "Edge-perturbing attacks and anonymous GCN defense"
)]
struct Cli {
    /// Directory receiving this run's artifacts and manifest.
    #[arg(long, global = true, env = "ANONGCN_OUT_DIR", default_value = "anongcn-out")]
    out_dir: PathBuf,

    /// Seed for every random stream of the run (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON config: `{"seed": .., "train": {..}, "attack": {..}, ...}`.
    /// Flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert Cora files or a synthetic spec into a native graph file.
    Ingest(ingest::Args),
    /// Train a spectral GCN or semi-GCN.
    Train(train::Args),
    /// Run the edge-perturbing attack against a semi-GCN checkpoint.
    Attack(attack::Args),
    /// Train the anonymous GCN.
    Defend(defend::Args),
    /// Classify nodes from features alone with a trained anonymous GCN.
    Infer(infer::Args),
    /// Node-signal and localization experiments.
    #[command(subcommand)]
    Experiment(experiment::Kind),
    /// Merge metrics from finished runs into one table.
    Report(report::Args),
}

/// Settings shared by every command.
pub struct Global {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub config: ConfigFile,
}

fn dispatch(cli: Cli) -> Outcome {
    let config = ConfigFile::load(cli.config.as_deref())?;
    let seed = match cli.seed {
        Some(s) => s,
        None => config.seed()?.unwrap_or(0),
    };
    let global = Global {
        out_dir: cli.out_dir,
        seed,
        config,
    };
    match cli.command {
        Command::Ingest(a) => ingest::run(&global, a),
        Command::Train(a) => train::run(&global, a),
        Command::Attack(a) => attack::run(&global, a),
        Command::Defend(a) => defend::run(&global, a),
        Command::Infer(a) => infer::run(&global, a),
        Command::Experiment(k) => experiment::run(&global, k),
        Command::Report(a) => report::run(&global, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
