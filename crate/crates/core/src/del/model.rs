use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DelError, EmbeddingVector, LabelVector};
use crate::numerics::{MlpInput, MlpParams, ParamsDocument};
use crate::scalar::Scalar;

/// How a [`LabelVector`] is fed to the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputEncoding {
    /// One real per label: `(c − (C+1)/2) / C`.
    #[default]
    CenteredScaled,
    /// `C` indicator inputs per label (evaluated sparsely). The first layer
    /// grows by a factor `C`; distances track the error much more tightly.
    OneHot,
}

impl InputEncoding {
    pub fn input_dim(self, m: usize, num_classes: u16) -> usize {
        match self {
            InputEncoding::CenteredScaled => m,
            InputEncoding::OneHot => m * num_classes as usize,
        }
    }

    pub fn encode<T: Scalar>(self, x: &LabelVector) -> EncodedInput<T> {
        match self {
            InputEncoding::CenteredScaled => EncodedInput::Dense(x.encode()),
            InputEncoding::OneHot => {
                let c = x.num_classes() as usize;
                EncodedInput::Indicator {
                    dim: x.len() * c,
                    active: x.labels().iter().enumerate().map(|(i, &l)| i * c + l as usize - 1).collect(),
                }
            }
        }
    }
}

/// An encoded label vector, owned.
#[derive(Debug, Clone, PartialEq)]
pub enum EncodedInput<T> {
    Dense(Vec<T>),
    Indicator { dim: usize, active: Vec<usize> },
}

impl<T> EncodedInput<T> {
    pub fn as_input(&self) -> MlpInput<'_, T> {
        match self {
            EncodedInput::Dense(x) => MlpInput::Dense(x),
            EncodedInput::Indicator { dim, active } => MlpInput::Indicator { dim: *dim, active },
        }
    }
}

/// A learned DEL function `f: Q^m → R^n` specific to one test label vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DelModel<T = f64> {
    params: MlpParams<T>,
    m: usize,
    n: usize,
    num_classes: u16,
    encoding: InputEncoding,
    training_seed: u64,
}

impl<T: Scalar> DelModel<T> {
    pub fn new(
        params: MlpParams<T>,
        m: usize,
        num_classes: u16,
        encoding: InputEncoding,
        training_seed: u64,
    ) -> Result<Self, DelError> {
        let n = params.out_dim();
        if params.in_dim() != encoding.input_dim(m, num_classes) {
            return Err(DelError::LengthMismatch {
                expected: encoding.input_dim(m, num_classes),
                actual: params.in_dim(),
            });
        }
        if n == 0 || n >= m {
            return Err(DelError::InvalidConfig(format!(
                "embedding dimension n={n} must satisfy 0 < n < m={m}"
            )));
        }
        if num_classes < 2 {
            return Err(DelError::InvalidConfig(format!("need at least 2 classes, got {num_classes}")));
        }
        Ok(Self {
            params,
            m,
            n,
            num_classes,
            encoding,
            training_seed,
        })
    }

    /// Freshly initialized, untrained model (same initialization as training).
    pub fn untrained(
        m: usize,
        n: usize,
        num_classes: u16,
        hidden: usize,
        encoding: InputEncoding,
        seed: u64,
    ) -> Result<Self, DelError> {
        let params = MlpParams::init_uniform(encoding.input_dim(m, num_classes), hidden, n, &mut init_rng(seed));
        Self::new(params, m, num_classes, encoding, seed)
    }

    pub fn params(&self) -> &MlpParams<T> {
        &self.params
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_classes(&self) -> u16 {
        self.num_classes
    }

    pub fn encoding(&self) -> InputEncoding {
        self.encoding
    }

    pub fn training_seed(&self) -> u64 {
        self.training_seed
    }

    pub fn check_labels(&self, x: &LabelVector) -> Result<(), DelError> {
        if x.len() != self.m {
            return Err(DelError::LengthMismatch {
                expected: self.m,
                actual: x.len(),
            });
        }
        if x.num_classes() != self.num_classes {
            return Err(DelError::ClassMismatch {
                expected: self.num_classes,
                actual: x.num_classes(),
            });
        }
        Ok(())
    }

    /// `f(x)`.
    pub fn embed(&self, x: &LabelVector) -> Result<EmbeddingVector<T>, DelError> {
        self.check_labels(x)?;
        let y = self.params.forward(self.encoding.encode::<T>(x).as_input())?;
        EmbeddingVector::from_unit(y)
    }

    pub fn to_document(&self) -> DelModelDocument {
        DelModelDocument {
            format_version: DelModelDocument::VERSION,
            m: self.m,
            n: self.n,
            num_classes: self.num_classes,
            encoding: self.encoding,
            training_seed: self.training_seed,
            params: self.params.to_document(),
        }
    }

    pub fn from_document(doc: &DelModelDocument) -> Result<Self, DelError> {
        if doc.format_version != DelModelDocument::VERSION {
            return Err(DelError::Format(format!("unsupported format_version {}", doc.format_version)));
        }
        let params = MlpParams::from_document(&doc.params)?;
        let model = Self::new(params, doc.m, doc.num_classes, doc.encoding, doc.training_seed)?;
        if model.n != doc.n {
            return Err(DelError::Format(format!("header n={} but parameters give {}", doc.n, model.n)));
        }
        Ok(model)
    }

    /// Canonical serialized bytes (compact JSON), used for content addressing.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.to_document()).expect("document serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DelError> {
        let doc: DelModelDocument = serde_json::from_slice(bytes).map_err(|e| DelError::Format(e.to_string()))?;
        Self::from_document(&doc)
    }
}

/// On-disk form of a [`DelModel`]: header fields plus the parameter document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelModelDocument {
    pub format_version: u32,
    pub m: usize,
    pub n: usize,
    pub num_classes: u16,
    pub encoding: InputEncoding,
    pub training_seed: u64,
    pub params: ParamsDocument,
}

impl DelModelDocument {
    pub const VERSION: u32 = 1;
}

pub(crate) fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_n_not_below_m() {
        assert!(DelModel::<f64>::untrained(10, 10, 4, 8, InputEncoding::CenteredScaled, 0).is_err());
        assert!(DelModel::<f64>::untrained(10, 12, 4, 8, InputEncoding::CenteredScaled, 0).is_err());
        assert!(DelModel::<f64>::untrained(10, 3, 4, 8, InputEncoding::CenteredScaled, 0).is_ok());
    }

    #[test]
    fn embed_checks_shape() {
        let f = DelModel::<f64>::untrained(10, 3, 4, 8, InputEncoding::CenteredScaled, 0).unwrap();
        let short = LabelVector::new(vec![1; 9], 4).unwrap();
        let other_c = LabelVector::new(vec![1; 10], 5).unwrap();
        assert!(matches!(f.embed(&short), Err(DelError::LengthMismatch { .. })));
        assert!(matches!(f.embed(&other_c), Err(DelError::ClassMismatch { .. })));
    }

    #[test]
    fn bytes_round_trip() {
        let f = DelModel::<f64>::untrained(20, 4, 5, 6, InputEncoding::CenteredScaled, 11).unwrap();
        let g = DelModel::<f64>::from_bytes(&f.to_bytes()).unwrap();
        assert_eq!(f, g);
        assert_eq!(f.to_bytes(), g.to_bytes());
        let x = LabelVector::new((0..20).map(|i| (i % 5 + 1) as u16).collect(), 5).unwrap();
        assert_eq!(f.embed(&x).unwrap(), g.embed(&x).unwrap());
    }

    #[test]
    fn one_hot_matches_dense_indicator() {
        let x = LabelVector::new(vec![3, 1, 2], 3).unwrap();
        let EncodedInput::Indicator { dim, active } = InputEncoding::OneHot.encode::<f64>(&x) else {
            panic!("expected indicator input")
        };
        assert_eq!(dim, 9);
        assert_eq!(active, vec![2, 3, 7]);
        let f = DelModel::<f64>::untrained(3, 2, 3, 5, InputEncoding::OneHot, 1).unwrap();
        assert_eq!(f.params().in_dim(), 9);
        let mut dense = vec![0.0; 9];
        for i in active {
            dense[i] = 1.0;
        }
        let direct = f.params().forward(&dense).unwrap();
        let via = f.embed(&x).unwrap();
        for (a, b) in direct.iter().zip(via.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        let g = DelModel::<f64>::from_bytes(&f.to_bytes()).unwrap();
        assert_eq!(g.encoding(), InputEncoding::OneHot);
    }

    #[test]
    fn bad_header_rejected() {
        let f = DelModel::<f64>::untrained(20, 4, 5, 6, InputEncoding::CenteredScaled, 11).unwrap();
        let mut doc = f.to_document();
        doc.n = 5;
        assert!(DelModel::<f64>::from_document(&doc).is_err());
        let mut doc = f.to_document();
        doc.format_version = 9;
        assert!(DelModel::<f64>::from_document(&doc).is_err());
    }
}
