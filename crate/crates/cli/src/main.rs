//! `daimon`: batch front end for DEL training, the attack experiments, the
//! proof-of-improvement primitives and the chain simulator.
//!
//! Exit codes: 0 success, 1 contract or validation failure, 2 I/O or
//! configuration error. Every command needs an explicit `--seed`.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{attack, chain, del, poi};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "daimon", version, about = "Decentralized model-improvement market toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random choice the command makes (required).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON job description; individual flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving the command's artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a DEL function for a fresh random test label vector.
    DelTrain(del::TrainArgs),
    /// Score a trained DEL function on fresh perturbations.
    DelEval(del::EvalArgs),
    /// Tabulate spherical-cap hit probabilities and trial counts.
    AttackBruteforce(attack::BruteforceArgs),
    /// Train an inverse-mapping attacker against a DEL function.
    AttackInverse(attack::InverseArgs),
    /// Run a multi-peer scenario and write its trace.
    ChainRun(chain::RunArgs),
    /// Re-verify a chain file block by block.
    ChainVerify(chain::ChainFileArgs),
    /// Print a chain file as a table.
    ChainDump(chain::ChainFileArgs),
    /// Rebuild the chain from an event log.
    ChainReplay(chain::ReplayArgs),
    /// File-based proof-of-improvement operations.
    #[command(subcommand)]
    Poi(poi::PoiCommand),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli
        .common
        .seed
        .ok_or_else(|| CliError::config("--seed is required; runs are never implicitly random"))?;
    let common = &cli.common;
    let written = match cli.command {
        Command::DelTrain(a) => del::train(common, seed, a)?,
        Command::DelEval(a) => del::eval(common, seed, a)?,
        Command::AttackBruteforce(a) => attack::bruteforce(common, seed, a)?,
        Command::AttackInverse(a) => attack::inverse(common, seed, a)?,
        Command::ChainRun(a) => chain::run(common, seed, a)?,
        Command::ChainVerify(a) => chain::verify(common, seed, a)?,
        Command::ChainDump(a) => chain::dump(common, seed, a)?,
        Command::ChainReplay(a) => chain::replay(common, seed, a)?,
        Command::Poi(c) => poi::run(common, seed, c)?,
    };
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
