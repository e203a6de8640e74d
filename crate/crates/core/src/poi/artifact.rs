use serde::{Deserialize, Serialize};

use super::wire::{FieldReader, FieldWriter};
use super::{Digest, PoiError, digest};
use crate::del::LabelVector;

const TAG: &[u8] = b"daimon/model/v1";

/// Lookup-model stand-in: the model's predictions `M(Z)` on the canonical
/// test inputs, plus a free-form description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub predicted_labels: LabelVector,
    pub metadata: String,
}

impl ModelArtifact {
    pub fn new(predicted_labels: LabelVector, metadata: impl Into<String>) -> Self {
        Self {
            predicted_labels,
            metadata: metadata.into(),
        }
    }

    /// Fields: tag, `C` (u16 BE), labels (u16 BE each), metadata (UTF-8).
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let labels: Vec<u8> = self
            .predicted_labels
            .labels()
            .iter()
            .flat_map(|l| l.to_be_bytes())
            .collect();
        FieldWriter::new()
            .field(TAG)
            .field(&self.predicted_labels.num_classes().to_be_bytes())
            .field(&labels)
            .field(self.metadata.as_bytes())
            .finish()
    }

    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, PoiError> {
        let mut r = FieldReader::new(bytes);
        r.tag(TAG)?;
        let c = u16::from_be_bytes(r.array::<2>()?);
        let raw = r.field()?;
        if raw.len() % 2 != 0 {
            return Err(PoiError::Encoding("odd label byte count".into()));
        }
        let labels = raw.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]])).collect();
        let metadata = String::from_utf8(r.field()?.to_vec()).map_err(|e| PoiError::Encoding(e.to_string()))?;
        r.finish()?;
        Ok(Self {
            predicted_labels: LabelVector::new(labels, c)?,
            metadata,
        })
    }

    pub fn digest(&self) -> Digest {
        digest(&self.canonical_bytes())
    }
}
