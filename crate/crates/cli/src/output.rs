use std::fs;
use std::path::{Path, PathBuf};

use daimon_core::poi::{Digest, digest};
use serde::Serialize;
use serde::de::DeserializeOwned;

use crate::error::CliError;

/// Seed and configuration fingerprint stamped on every CSV.
#[derive(Debug, Clone, Copy)]
pub struct RunMeta {
    pub seed: u64,
    pub config_digest: Digest,
}

impl RunMeta {
    /// Fingerprints the effective configuration, after flag overrides.
    pub fn new<C: Serialize>(seed: u64, config: &C) -> Self {
        let bytes = serde_json::to_vec(config).expect("configuration serializes");
        Self {
            seed,
            config_digest: digest(&bytes),
        }
    }

    pub fn trailer(&self) -> String {
        format!("# seed={} config_digest={}\n", self.seed, self.config_digest)
    }
}

/// Files a command intends to emit. Nothing touches the disk until
/// [`Artifacts::write`], so a failed command leaves no partial output.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), bytes.into()));
    }

    pub fn add_csv(&mut self, name: &str, csv: &str, meta: &RunMeta) {
        self.add(name, format!("{csv}{}", meta.trailer()));
    }

    pub fn write(self) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in self.files {
            let path = self.dir.join(name);
            fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn read_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = read_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

/// The job description from `--config`, or its defaults when none is given.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    match path {
        Some(p) => read_json(p),
        None => Ok(T::default()),
    }
}
