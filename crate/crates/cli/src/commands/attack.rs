use std::path::PathBuf;

use clap::Args;
use daimon_core::attacks::{AttackError, InverseAttackConfig, InverseMode, cap_grid_csv, train_inverse_attack};
use serde::{Deserialize, Serialize};

use super::DelBundle;
use crate::Common;
use crate::error::CliError;
use crate::output::{Artifacts, RunMeta, load_config};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BruteforceJob {
    pub ns: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub alpha: f64,
}

impl Default for BruteforceJob {
    fn default() -> Self {
        Self {
            ns: vec![2, 4, 8, 16, 32, 64, 128, 256],
            epsilons: (1..=10).map(|k| k as f64 * 0.05).collect(),
            alpha: 0.5,
        }
    }
}

#[derive(Debug, Args)]
pub struct BruteforceArgs {
    /// Embedding dimensions, comma separated.
    #[arg(long = "n", value_delimiter = ',')]
    ns: Vec<usize>,
    /// Distance thresholds, comma separated.
    #[arg(long = "epsilon", value_delimiter = ',')]
    epsilons: Vec<f64>,
    /// Required success probability of the whole attack.
    #[arg(long)]
    alpha: Option<f64>,
}

pub fn bruteforce(common: &Common, seed: u64, args: BruteforceArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut job: BruteforceJob = load_config(common.config.as_deref())?;
    if !args.ns.is_empty() {
        job.ns = args.ns;
    }
    if !args.epsilons.is_empty() {
        job.epsilons = args.epsilons;
    }
    if let Some(a) = args.alpha {
        job.alpha = a;
    }
    if job.ns.is_empty() || job.epsilons.is_empty() {
        return Err(CliError::config("the grid needs at least one n and one epsilon"));
    }
    let meta = RunMeta::new(seed, &job);
    let csv = cap_grid_csv(&job.ns, &job.epsilons, job.alpha).map_err(CliError::config)?;
    print!("{csv}");

    let mut out = Artifacts::new(&common.out_dir);
    out.add_csv("cap_grid.csv", &csv, &meta);
    out.write()
}

#[derive(Debug, Args)]
pub struct InverseArgs {
    /// Bundle written by `del-train`.
    #[arg(long)]
    model: PathBuf,
    /// `nearby`, `random` or `both`.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
}

fn attack_failure(e: AttackError) -> CliError {
    match e {
        AttackError::Diverged { .. } => CliError::validation(e),
        other => CliError::config(other),
    }
}

pub fn inverse(common: &Common, seed: u64, args: InverseArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut job: InverseAttackConfig = load_config(common.config.as_deref())?;
    job.seed = seed;
    let modes = match args.mode.as_deref() {
        None => vec![job.mode],
        Some("both") => vec![InverseMode::Nearby, InverseMode::Random],
        Some(s) => vec![s.parse::<InverseMode>().map_err(CliError::config)?],
    };
    if let Some(e) = args.epochs {
        job.epochs = e;
    }
    if let Some(h) = args.hidden {
        job.hidden = h;
    }
    job.validate().map_err(CliError::config)?;
    let (target, f) = DelBundle::load(&args.model)?;
    let y_t = f.embed(&target).map_err(CliError::config)?;

    let mut out = Artifacts::new(&common.out_dir);
    for mode in modes {
        let cfg = InverseAttackConfig { mode, ..job.clone() };
        let meta = RunMeta::new(seed, &cfg);
        let trace = train_inverse_attack(&f, &y_t, &cfg, &target).map_err(attack_failure)?;
        let min = trace.errors.iter().copied().fold(f64::INFINITY, f64::min);
        println!(
            "{}: epoch-0 error {:.4}, final error {:.4}, minimum {:.4} over {} epochs",
            mode.as_str(),
            trace.errors[0],
            trace.final_error(),
            min,
            cfg.epochs
        );
        out.add_csv(&format!("inverse_{}.csv", mode.as_str()), &trace.to_csv(), &meta);
    }
    out.write()
}
