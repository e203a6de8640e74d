pub mod attack;
pub mod chain;
pub mod del;
pub mod poi;

use std::path::Path;

use daimon_core::del::{DelModel, DelModelDocument, LabelVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::read_json;

/// Independent random stream `id` under `seed`.
pub fn rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// A trained DEL function together with the test labels it was trained for.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelBundle {
    pub target: LabelVector,
    pub model: DelModelDocument,
}

impl DelBundle {
    pub fn load(path: &Path) -> Result<(LabelVector, DelModel<f64>), CliError> {
        let bundle: DelBundle = read_json(path)?;
        let model = DelModel::from_document(&bundle.model)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        model
            .check_labels(&bundle.target)
            .map_err(|e| CliError::config(format!("{}: target does not fit the model: {e}", path.display())))?;
        Ok((bundle.target, model))
    }
}

/// Accepts only an empty object (or no file) for commands without options.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoOptions {}
