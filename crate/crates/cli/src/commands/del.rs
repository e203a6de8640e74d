use std::path::PathBuf;

use clap::Args;
use daimon_core::del::{DelError, DelTrainConfig, InputEncoding, LabelVector, eval_del, train_del};
use daimon_core::sim::{DelSetup, SimError};
use serde::{Deserialize, Serialize};

use super::{DelBundle, rng};
use crate::Common;
use crate::error::CliError;
use crate::output::{Artifacts, RunMeta, load_config};

/// `del-train` job. The defaults are the desk-scale setting: m = 1000,
/// n = 64, C = 10, hidden 256, one scalar input per label.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainJob {
    pub m: usize,
    pub n: usize,
    pub num_classes: u16,
    pub train: DelTrainConfig,
}

impl Default for TrainJob {
    fn default() -> Self {
        Self {
            m: 1000,
            n: 64,
            num_classes: 10,
            train: DelTrainConfig::default(),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    /// `centered-scaled` or `one-hot`.
    #[arg(long, value_parser = parse_encoding)]
    encoding: Option<InputEncoding>,
    /// File name of the trained bundle inside the output directory.
    #[arg(long, default_value = "del.json")]
    output: String,
}

fn parse_encoding(s: &str) -> Result<InputEncoding, String> {
    match s {
        "centered-scaled" | "scalar" => Ok(InputEncoding::CenteredScaled),
        "one-hot" => Ok(InputEncoding::OneHot),
        other => Err(format!("unknown encoding {other:?}")),
    }
}

fn del_failure(e: DelError) -> CliError {
    match e {
        DelError::Diverged { .. } => CliError::validation(e),
        other => CliError::config(other),
    }
}

pub fn train(common: &Common, seed: u64, args: TrainArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut job: TrainJob = load_config(common.config.as_deref())?;
    job.train.seed = seed;
    if let Some(e) = args.epochs {
        job.train.epochs = e;
    }
    if let Some(h) = args.hidden {
        job.train.hidden = h;
    }
    if let Some(enc) = args.encoding {
        job.train.encoding = enc;
    }
    let setup = DelSetup {
        m: job.m,
        n: job.n,
        num_classes: job.num_classes,
        train: job.train.clone(),
    };
    setup.validate().map_err(|e| match e {
        SimError::Config(msg) => CliError::config(msg),
        other => CliError::config(other),
    })?;
    let meta = RunMeta::new(seed, &job);

    let target = LabelVector::random(job.m, job.num_classes, &mut rng(seed, 0)).map_err(CliError::config)?;
    let (model, trace) = train_del::<f64>(&target, job.n, &job.train).map_err(del_failure)?;

    let first = trace.epochs.first().expect("at least one epoch");
    let last = trace.epochs.last().expect("at least one epoch");
    println!(
        "trained m={} n={} C={} for {} epochs: train loss {:.4} -> {:.4}, test loss {:.4} -> {:.4}",
        job.m,
        job.n,
        job.num_classes,
        trace.epochs.len(),
        first.train_loss,
        last.train_loss,
        first.test_loss,
        last.test_loss
    );

    let bundle = DelBundle {
        target,
        model: model.to_document(),
    };
    let mut out = Artifacts::new(&common.out_dir);
    out.add(&args.output, serde_json::to_vec(&bundle).expect("bundle serializes"));
    out.add_csv("del_train.csv", &trace.to_csv(), &meta);
    out.write()
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalJob {
    pub samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Bundle written by `del-train`.
    #[arg(long)]
    model: PathBuf,
    /// Number of perturbations to score (default 2000).
    #[arg(long)]
    samples: Option<usize>,
}

pub fn eval(common: &Common, seed: u64, args: EvalArgs) -> Result<Vec<PathBuf>, CliError> {
    let mut job: EvalJob = load_config(common.config.as_deref())?;
    if args.samples.is_some() {
        job.samples = args.samples;
    }
    let samples = job.samples.unwrap_or(2000);
    job.samples = Some(samples);
    if samples < 2 {
        return Err(CliError::config("samples must be at least 2 to estimate a correlation"));
    }
    let (target, model) = DelBundle::load(&args.model)?;
    let meta = RunMeta::new(seed, &job);

    let report = eval_del(&model, &target, samples, &mut rng(seed, 0)).map_err(CliError::config)?;
    println!("pearson_r={:.6}", report.pearson_r);
    println!("mean_abs_deviation={:.6}", report.mean_abs_deviation);
    println!("max_abs_deviation={:.6}", report.max_abs_deviation);

    let mut out = Artifacts::new(&common.out_dir);
    out.add_csv("del_eval.csv", &report.to_csv(), &meta);
    out.write()
}
