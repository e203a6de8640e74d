use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use daimon_core::poi::{
    Address, ModelArtifact, PeerIdentity, PoiError, PoiProof, digest, keygen, prove, verify,
};
use daimon_core::sim::synth_model;
use serde::{Deserialize, Serialize};

use super::{DelBundle, NoOptions, rng};
use crate::Common;
use crate::error::CliError;
use crate::output::{Artifacts, read_bytes, read_json, read_string, load_config};

#[derive(Debug, Subcommand)]
pub enum PoiCommand {
    /// Generate an Ed25519 identity.
    Keygen(KeygenArgs),
    /// Write a lookup model with a chosen error against the bundle's labels.
    SynthModel(SynthArgs),
    /// Sign a proof of improvement for a model file.
    Prove(ProveArgs),
    /// Check a proof against a model file and endorse it.
    Verify(VerifyArgs),
}

/// On-disk identity. The secret key is stored in the clear: these files
/// are for local interoperability testing only.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyFile {
    pub secret_key: String,
    pub public_key: String,
    pub address: Address,
}

impl KeyFile {
    fn of(id: &PeerIdentity) -> Self {
        Self {
            secret_key: hex::encode(id.secret_bytes()),
            public_key: hex::encode(id.public_key()),
            address: id.address(),
        }
    }

    fn load(path: &Path) -> Result<PeerIdentity, CliError> {
        let file: KeyFile = read_json(path)?;
        let bad = |what: &str| CliError::config(format!("{}: {what}", path.display()));
        let secret: [u8; 32] = hex::decode(&file.secret_key)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| bad("secret_key must be 64 hex digits"))?;
        let id = PeerIdentity::from_secret_bytes(&secret);
        if hex::encode(id.public_key()) != file.public_key || id.address() != file.address {
            return Err(bad("public key or address does not match the secret key"));
        }
        Ok(id)
    }
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    /// Writes `<name>.key.json`.
    #[arg(long, default_value = "peer")]
    name: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthJob {
    pub error: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Bundle written by `del-train`; its labels are the reference.
    #[arg(long)]
    del: PathBuf,
    /// Fraction of wrong predictions.
    #[arg(long)]
    error: Option<f64>,
    #[arg(long, default_value = "model.bin")]
    output: String,
}

#[derive(Debug, Args)]
pub struct ProveArgs {
    #[arg(long)]
    del: PathBuf,
    /// Canonical model file.
    #[arg(long)]
    model: PathBuf,
    /// Prover identity.
    #[arg(long)]
    key: PathBuf,
    #[arg(long, default_value = "proof.json")]
    output: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyJob {
    pub d_c: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    del: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Proof in JSON form.
    #[arg(long)]
    proof: PathBuf,
    /// Verifier identity; derived from the seed when omitted.
    #[arg(long)]
    key: Option<PathBuf>,
    /// Current best distance (default 1).
    #[arg(long, allow_negative_numbers = true)]
    d_c: Option<f64>,
    /// Required improvement margin (default 0.005).
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long, default_value = "verification.json")]
    output: String,
}

pub fn run(common: &Common, seed: u64, cmd: PoiCommand) -> Result<Vec<PathBuf>, CliError> {
    match cmd {
        PoiCommand::Keygen(a) => {
            let _: NoOptions = load_config(common.config.as_deref())?;
            let id = keygen(&mut rng(seed, 0));
            println!("address {}", id.address());
            let mut out = Artifacts::new(&common.out_dir);
            let json = serde_json::to_string_pretty(&KeyFile::of(&id)).expect("key file serializes");
            out.add(&format!("{}.key.json", a.name), json);
            out.write()
        }
        PoiCommand::SynthModel(a) => synth(common, seed, a),
        PoiCommand::Prove(a) => prove_cmd(common, a),
        PoiCommand::Verify(a) => verify_cmd(common, seed, a),
    }
}

fn synth(common: &Common, seed: u64, args: SynthArgs) -> Result<Vec<PathBuf>, CliError> {
    let job: SynthJob = load_config(common.config.as_deref())?;
    let error = args.error.or(job.error).ok_or_else(|| CliError::config("--error is required"))?;
    let (target, _) = DelBundle::load(&args.del)?;
    let model = synth_model(&target, error, &mut rng(seed, 2)).map_err(CliError::config)?;
    let bytes = model.canonical_bytes();
    println!("model digest {}", digest(&bytes));
    let mut out = Artifacts::new(&common.out_dir);
    out.add(&args.output, bytes);
    out.write()
}

fn load_model(path: &Path) -> Result<(Vec<u8>, Result<ModelArtifact, PoiError>), CliError> {
    let bytes = read_bytes(path)?;
    let parsed = ModelArtifact::from_canonical_bytes(&bytes);
    Ok((bytes, parsed))
}

fn prove_cmd(common: &Common, args: ProveArgs) -> Result<Vec<PathBuf>, CliError> {
    let _: NoOptions = load_config(common.config.as_deref())?;
    let (_, f) = DelBundle::load(&args.del)?;
    let prover = KeyFile::load(&args.key)?;
    let (_, model) = load_model(&args.model)?;
    let model = model.map_err(|e| CliError::config(format!("{}: {e}", args.model.display())))?;
    let proof = prove(&model, &f, &prover).map_err(CliError::config)?;
    println!("proof {} for model {}", proof.id(), proof.g);
    let mut out = Artifacts::new(&common.out_dir);
    out.add(&args.output, proof.to_json());
    out.write()
}

fn verify_cmd(common: &Common, seed: u64, args: VerifyArgs) -> Result<Vec<PathBuf>, CliError> {
    let job: VerifyJob = load_config(common.config.as_deref())?;
    let d_c = args.d_c.or(job.d_c).unwrap_or(1.0);
    let delta = args.delta.or(job.delta).unwrap_or(0.005);
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(CliError::config(format!("--delta must be a non-negative number, got {delta}")));
    }
    if !(0.0..=1.0).contains(&d_c) {
        return Err(CliError::config(format!("--d-c must lie in [0, 1], got {d_c}")));
    }
    let (target, f) = DelBundle::load(&args.del)?;
    let proof = PoiProof::from_json(&read_string(&args.proof)?)
        .map_err(|e| CliError::config(format!("{}: {e}", args.proof.display())))?;
    let verifier = match &args.key {
        Some(p) => KeyFile::load(p)?,
        None => keygen(&mut rng(seed, 1)),
    };
    let y_t = f.embed(&target).map_err(CliError::config)?;

    let reject = |e: PoiError| CliError::validation(format!("rejected: {} ({e})", e.kind()));
    proof.check_signature().map_err(reject)?;
    // A model file that no longer hashes to the committed digest is a
    // digest mismatch even when the tampering also broke its encoding.
    let (bytes, model) = load_model(&args.model)?;
    let actual = digest(&bytes);
    if actual != proof.g {
        return Err(reject(PoiError::DigestMismatch {
            claimed: proof.g,
            actual,
        }));
    }
    let model = model.map_err(reject)?;
    let endorsement = verify(&model, &proof, &f, &y_t, d_c, delta, &verifier).map_err(reject)?;

    let distance = daimon_core::del::distance(&proof.y, &y_t).map_err(CliError::config)?;
    println!("accepted: distance {distance} < {d_c} - {delta}");
    let mut out = Artifacts::new(&common.out_dir);
    out.add(&args.output, endorsement.to_json());
    out.write()
}
