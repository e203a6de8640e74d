use std::path::{Path, PathBuf};

use clap::Args;
use daimon_core::chain::{Block, ChainError, blocks_from_jsonl, blocks_to_jsonl, verify_chain};
use daimon_core::sim::{ScenarioConfig, ScenarioEvent, ScenarioTrace, SimError, replay_events, run_scenario};

use super::NoOptions;
use crate::Common;
use crate::error::CliError;
use crate::output::{Artifacts, RunMeta, load_config, read_string};

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    periods: Option<usize>,
    #[arg(long)]
    validators: Option<usize>,
}

fn sim_failure(e: SimError) -> CliError {
    match e {
        SimError::Config(_) => CliError::config(e),
        other => CliError::validation(other),
    }
}

pub fn run(common: &Common, seed: u64, args: RunArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg: ScenarioConfig = load_config(common.config.as_deref())?;
    cfg.seed = seed;
    if let Some(p) = args.periods {
        cfg.periods = p;
    }
    if let Some(v) = args.validators {
        cfg.validators = v;
    }
    cfg.validate().map_err(CliError::config)?;
    if cfg.validators == 0 {
        eprintln!("warning: no validators configured; no improvement block can be committed");
    }
    let meta = RunMeta::new(seed, &cfg);

    let run = run_scenario(&cfg).map_err(sim_failure)?;
    let trace = &run.trace;
    trace.verify_replay(Some(&run.store)).map_err(sim_failure)?;
    let reparsed = blocks_from_jsonl(&trace.chain_jsonl()).map_err(CliError::validation)?;
    verify_chain(&reparsed, Some(&run.store)).map_err(CliError::validation)?;

    print_summary(trace);
    println!("chain verified: {} blocks, replay reproduces it exactly", trace.chain.len());

    let mut out = Artifacts::new(&common.out_dir);
    out.add("events.jsonl", trace.events_jsonl());
    out.add("chain.jsonl", trace.chain_jsonl());
    out.add_csv("summary.csv", &trace.summary_csv(), &meta);
    out.add_csv("balances.csv", &balances_csv(trace), &meta);
    out.write()
}

fn print_summary(trace: &ScenarioTrace) {
    println!("{:>6}  {:>11}  {:>24}  {:>10}  {:>10}  {:>16}", "period", "submissions", "winner", "distance", "true_err", "reward");
    for p in &trace.periods {
        let winner = p
            .winner
            .map(|a| trace.role_of(&a).map_or_else(|| a.to_string(), |r| r.to_string()))
            .unwrap_or_else(|| "-".into());
        let num = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
        println!(
            "{:>6}  {:>11}  {:>24}  {:>10}  {:>10}  {:>16}",
            p.period,
            p.submissions,
            winner,
            num(p.distance),
            num(p.true_error),
            p.reward.map_or_else(|| "-".to_string(), |r| r.to_string())
        );
    }
}

fn balances_csv(trace: &ScenarioTrace) -> String {
    let mut out = String::from("address,role,balance\n");
    for (addr, role) in &trace.roles {
        let balance = trace.balances.get(addr).copied().unwrap_or_default();
        out.push_str(&format!("{addr},{role},{balance}\n"));
    }
    out
}

#[derive(Debug, Args)]
pub struct ChainFileArgs {
    /// Chain file, one JSON block per line.
    #[arg(long)]
    chain: PathBuf,
}

fn load_blocks(path: &Path) -> Result<Vec<Block>, CliError> {
    let text = read_string(path)?;
    blocks_from_jsonl(&text).map_err(|e| match e {
        ChainError::Format { line, detail } => {
            CliError::validation(format!("block {} (line {line}) is malformed: {detail}", line.saturating_sub(1)))
        }
        other => CliError::validation(other),
    })
}

pub fn verify(common: &Common, _seed: u64, args: ChainFileArgs) -> Result<Vec<PathBuf>, CliError> {
    let _: NoOptions = load_config(common.config.as_deref())?;
    let blocks = load_blocks(&args.chain)?;
    let ledger = verify_chain(&blocks, None).map_err(|e| match e {
        ChainError::Integrity { block, reason } => {
            CliError::validation(format!("chain verification failed at block {block}: {reason}"))
        }
        other => CliError::validation(other),
    })?;
    println!(
        "chain OK: {} blocks, best distance {}",
        ledger.blocks().len(),
        ledger.best_distance()
    );
    for (addr, balance) in ledger.balances() {
        println!("{addr} {balance}");
    }
    Ok(Vec::new())
}

pub fn dump(common: &Common, seed: u64, args: ChainFileArgs) -> Result<Vec<PathBuf>, CliError> {
    let opts: NoOptions = load_config(common.config.as_deref())?;
    let blocks = load_blocks(&args.chain)?;
    let mut csv = String::from("number,kind,hash,parent,winner,distance,verifications\n");
    for b in &blocks {
        let row = match b {
            Block::Problem(p) => format!(
                "{},problem,{},{},,,{}\n",
                p.number,
                p.hash,
                p.parent,
                p.tuples.len()
            ),
            Block::Improvement(i) => format!(
                "{},improvement,{},{},{},{},{}\n",
                i.number,
                i.hash,
                i.parent,
                i.winner.prover_address(),
                i.distance,
                i.verifications.len()
            ),
        };
        csv.push_str(&row);
    }
    print!("{csv}");
    let mut out = Artifacts::new(&common.out_dir);
    out.add_csv("chain_dump.csv", &csv, &RunMeta::new(seed, &opts));
    out.write()
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Event log written by `chain-run`.
    #[arg(long)]
    events: PathBuf,
    /// Recorded chain to compare the rebuilt one against.
    #[arg(long)]
    chain: Option<PathBuf>,
}

pub fn replay(common: &Common, _seed: u64, args: ReplayArgs) -> Result<Vec<PathBuf>, CliError> {
    let _: NoOptions = load_config(common.config.as_deref())?;
    let text = read_string(&args.events)?;
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let e: ScenarioEvent = serde_json::from_str(line)
            .map_err(|e| CliError::validation(format!("event at line {} is malformed: {e}", i + 1)))?;
        events.push(e);
    }
    let ledger = replay_events(&events, None).map_err(CliError::validation)?;
    let rebuilt = blocks_to_jsonl(ledger.blocks());
    if let Some(path) = &args.chain {
        let recorded = read_string(path)?;
        if recorded != rebuilt {
            let at = recorded
                .lines()
                .zip(rebuilt.lines())
                .position(|(a, b)| a != b)
                .unwrap_or_else(|| recorded.lines().count().min(rebuilt.lines().count()));
            return Err(CliError::validation(format!(
                "replayed chain differs from {} at block {at}",
                path.display()
            )));
        }
        println!("replay matches {}", path.display());
    }
    println!("replayed {} events into {} blocks", events.len(), ledger.blocks().len());
    let mut out = Artifacts::new(&common.out_dir);
    out.add("replayed_chain.jsonl", rebuilt);
    out.write()
}
