use serde::{Deserialize, Serialize};

use super::identity::{PeerIdentity, PublicKey, SignatureBytes, verify_signature};
use super::wire::{FieldReader, FieldWriter, hex_bytes};
use super::{Address, Digest, ModelArtifact, PoiError, digest};
use crate::del::{DelModel, EmbeddingVector, distance};

/// Largest elementwise difference tolerated between a proof's embedding and
/// the verifier's recomputation.
pub const EMBEDDING_TOLERANCE: f64 = 1e-9;

const POI_TAG: &[u8] = b"daimon/poi/v1";
const POI_SIG_TAG: &[u8] = b"daimon/poi-sig/v1";
const VERIFICATION_TAG: &[u8] = b"daimon/verification/v1";
const VERIFICATION_SIG_TAG: &[u8] = b"daimon/verification-sig/v1";

/// A prover's signed claim `{g, y, pk}` about one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoiProof {
    pub g: Digest,
    pub y: EmbeddingVector<f64>,
    #[serde(with = "hex_bytes")]
    pub pk: PublicKey,
    #[serde(with = "hex_bytes")]
    pub sig: SignatureBytes,
}

impl PoiProof {
    /// The bytes the prover signs: tag, `g`, `y`, `pk`.
    pub fn signing_bytes(&self) -> Vec<u8> {
        Self::message(&self.g, &self.y, &self.pk)
    }

    fn message(g: &Digest, y: &EmbeddingVector<f64>, pk: &PublicKey) -> Vec<u8> {
        FieldWriter::new()
            .field(POI_SIG_TAG)
            .field(&g.0)
            .f64s_field(y.values())
            .field(pk)
            .finish()
    }

    /// Canonical wire form: tag, `g`, `y` (big-endian IEEE-754 doubles),
    /// `pk`, `sig`, each length-prefixed.
    pub fn to_wire(&self) -> Vec<u8> {
        FieldWriter::new()
            .field(POI_TAG)
            .field(&self.g.0)
            .f64s_field(self.y.values())
            .field(&self.pk)
            .field(&self.sig)
            .finish()
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self, PoiError> {
        let mut r = FieldReader::new(bytes);
        let proof = Self::read(&mut r)?;
        r.finish()?;
        Ok(proof)
    }

    fn read(r: &mut FieldReader<'_>) -> Result<Self, PoiError> {
        r.tag(POI_TAG)?;
        let g = Digest(r.array()?);
        let y = EmbeddingVector::from_unit(r.f64s()?)?;
        let pk = r.array()?;
        let sig = r.array()?;
        Ok(Self { g, y, pk, sig })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("proof serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, PoiError> {
        serde_json::from_str(s).map_err(|e| PoiError::Encoding(e.to_string()))
    }

    /// Digest of the wire form; identifies the proof on the ledger.
    pub fn id(&self) -> Digest {
        digest(&self.to_wire())
    }

    pub fn prover_address(&self) -> Address {
        Address::of_public_key(&self.pk)
    }

    pub fn check_signature(&self) -> Result<(), PoiError> {
        verify_signature(&self.pk, &self.signing_bytes(), &self.sig)
            .map_err(|e| PoiError::BadSignature(format!("prover: {e}")))
    }
}

/// A verifier's signed endorsement `{π_P, d_c, δ, pk_V}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationProof {
    pub inner: PoiProof,
    #[serde(with = "crate::serde_dec")]
    pub d_c: f64,
    #[serde(with = "crate::serde_dec")]
    pub delta: f64,
    #[serde(with = "hex_bytes")]
    pub pk: PublicKey,
    #[serde(with = "hex_bytes")]
    pub sig: SignatureBytes,
}

impl VerificationProof {
    pub fn signing_bytes(&self) -> Vec<u8> {
        Self::message(&self.inner, self.d_c, self.delta, &self.pk)
    }

    fn message(inner: &PoiProof, d_c: f64, delta: f64, pk: &PublicKey) -> Vec<u8> {
        FieldWriter::new()
            .field(VERIFICATION_SIG_TAG)
            .field(&inner.to_wire())
            .f64_field(d_c)
            .f64_field(delta)
            .field(pk)
            .finish()
    }

    /// Canonical wire form: tag, inner proof wire bytes, `d_c`, `δ`, `pk`, `sig`.
    pub fn to_wire(&self) -> Vec<u8> {
        FieldWriter::new()
            .field(VERIFICATION_TAG)
            .field(&self.inner.to_wire())
            .f64_field(self.d_c)
            .f64_field(self.delta)
            .field(&self.pk)
            .field(&self.sig)
            .finish()
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self, PoiError> {
        let mut r = FieldReader::new(bytes);
        r.tag(VERIFICATION_TAG)?;
        let inner = PoiProof::from_wire(r.field()?)?;
        let d_c = r.f64()?;
        let delta = r.f64()?;
        let pk = r.array()?;
        let sig = r.array()?;
        r.finish()?;
        if !(delta >= 0.0) {
            return Err(PoiError::Encoding(format!("negative improvement margin {delta}")));
        }
        Ok(Self {
            inner,
            d_c,
            delta,
            pk,
            sig,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("proof serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, PoiError> {
        serde_json::from_str(s).map_err(|e| PoiError::Encoding(e.to_string()))
    }

    pub fn verifier_address(&self) -> Address {
        Address::of_public_key(&self.pk)
    }

    /// Both the verifier's and the embedded prover's signatures.
    pub fn check_signatures(&self) -> Result<(), PoiError> {
        verify_signature(&self.pk, &self.signing_bytes(), &self.sig)
            .map_err(|e| PoiError::BadSignature(format!("verifier: {e}")))?;
        self.inner.check_signature()
    }
}

/// Commits to `model` and its embedding under `f`, signed by `prover`.
pub fn prove(model: &ModelArtifact, f: &DelModel<f64>, prover: &PeerIdentity) -> Result<PoiProof, PoiError> {
    f.check_labels(&model.predicted_labels)
        .map_err(|e| PoiError::Contract(format!("model does not fit the DEL function: {e}")))?;
    let g = model.digest();
    let y = f.embed(&model.predicted_labels)?;
    let pk = *prover.public_key();
    let sig = prover.sign(&PoiProof::message(&g, &y, &pk));
    Ok(PoiProof { g, y, pk, sig })
}

/// Checks, in order: the prover's signature, the model digest, the
/// recomputed embedding, and strict improvement `d(y, y_t) < d_c − δ`.
/// On success returns the verifier's signed endorsement.
#[allow(clippy::too_many_arguments)]
pub fn verify(
    model: &ModelArtifact,
    proof: &PoiProof,
    f: &DelModel<f64>,
    y_t: &EmbeddingVector<f64>,
    d_c: f64,
    delta: f64,
    verifier: &PeerIdentity,
) -> Result<VerificationProof, PoiError> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(PoiError::Contract(format!("improvement margin must be non-negative, got {delta}")));
    }
    if !(0.0..=1.0).contains(&d_c) {
        return Err(PoiError::Contract(format!("current best distance {d_c} outside [0, 1]")));
    }
    if y_t.dim() != f.n() {
        return Err(PoiError::Contract(format!(
            "target embedding has dimension {}, DEL outputs {}",
            y_t.dim(),
            f.n()
        )));
    }

    proof.check_signature()?;

    let actual = model.digest();
    if actual != proof.g {
        return Err(PoiError::DigestMismatch {
            claimed: proof.g,
            actual,
        });
    }

    f.check_labels(&model.predicted_labels)
        .map_err(|e| PoiError::Contract(format!("model does not fit the DEL function: {e}")))?;
    let recomputed = f.embed(&model.predicted_labels)?;
    if proof.y.dim() != recomputed.dim() {
        return Err(PoiError::EmbeddingMismatch {
            index: proof.y.dim().min(recomputed.dim()),
            difference: f64::INFINITY,
        });
    }
    let worst = proof
        .y
        .values()
        .iter()
        .zip(recomputed.values())
        .map(|(a, b)| (a - b).abs())
        .enumerate()
        .fold((0, 0.0_f64), |acc, (i, d)| if !(d <= acc.1) { (i, d) } else { acc });
    if !(worst.1 <= EMBEDDING_TOLERANCE) {
        return Err(PoiError::EmbeddingMismatch {
            index: worst.0,
            difference: worst.1,
        });
    }

    let d = distance(&proof.y, y_t)?;
    if !(d < d_c - delta) {
        return Err(PoiError::InsufficientImprovement {
            distance: d,
            d_c,
            delta,
        });
    }

    let pk = *verifier.public_key();
    let sig = verifier.sign(&VerificationProof::message(proof, d_c, delta, &pk));
    Ok(VerificationProof {
        inner: proof.clone(),
        d_c,
        delta,
        pk,
        sig,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::del::{InputEncoding, LabelVector};
    use crate::poi::keygen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Fixture {
        f: DelModel<f64>,
        x_t: LabelVector,
        y_t: EmbeddingVector<f64>,
        prover: PeerIdentity,
        verifier: PeerIdentity,
    }

    fn fixture() -> Fixture {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x_t = LabelVector::random(40, 5, &mut rng).unwrap();
        let f = DelModel::untrained(40, 6, 5, 12, InputEncoding::CenteredScaled, 3).unwrap();
        let y_t = f.embed(&x_t).unwrap();
        Fixture {
            f,
            x_t,
            y_t,
            prover: keygen(&mut rng),
            verifier: keygen(&mut rng),
        }
    }

    #[test]
    fn perfect_model_verifies_at_distance_zero() {
        let fx = fixture();
        let model = ModelArtifact::new(fx.x_t.clone(), "perfect");
        let proof = prove(&model, &fx.f, &fx.prover).unwrap();
        assert_eq!(distance(&proof.y, &fx.y_t).unwrap(), 0.0);
        let v = verify(&model, &proof, &fx.f, &fx.y_t, 1.0, 0.005, &fx.verifier).unwrap();
        v.check_signatures().unwrap();
        assert_eq!(v.verifier_address(), fx.verifier.address());
    }

    #[test]
    fn two_provers_same_claim_different_signatures() {
        let fx = fixture();
        let model = ModelArtifact::new(fx.x_t.clone(), "m");
        let a = prove(&model, &fx.f, &fx.prover).unwrap();
        let b = prove(&model, &fx.f, &fx.verifier).unwrap();
        assert_eq!((a.g, &a.y), (b.g, &b.y));
        assert_ne!(a.sig, b.sig);
    }

    #[test]
    fn each_check_has_its_own_error() {
        let fx = fixture();
        let x = fx.x_t.clone().with_label(0, fx.x_t.labels()[0] % 5 + 1).unwrap();
        let model = ModelArtifact::new(x, "one flip");
        let proof = prove(&model, &fx.f, &fx.prover).unwrap();
        let d = distance(&proof.y, &fx.y_t).unwrap();
        let delta = 1e-4;
        let run = |m: &ModelArtifact, p: &PoiProof, d_c: f64| verify(m, p, &fx.f, &fx.y_t, d_c, delta, &fx.verifier);

        assert!(run(&model, &proof, d + 2.0 * delta).is_ok());

        let mut forged = proof.clone();
        forged.sig[10] ^= 1;
        assert_eq!(run(&model, &forged, 1.0).unwrap_err().kind(), "BadSignature");

        let swapped = ModelArtifact::new(fx.x_t.clone(), "other");
        assert_eq!(run(&swapped, &proof, 1.0).unwrap_err().kind(), "DigestMismatch");

        let mut values = proof.y.values().to_vec();
        values.swap(0, 1);
        let mut lying = proof.clone();
        lying.y = EmbeddingVector::from_unit(values).unwrap();
        lying.sig = fx.prover.sign(&lying.signing_bytes());
        assert_eq!(run(&model, &lying, 1.0).unwrap_err().kind(), "EmbeddingMismatch");

        assert_eq!(
            run(&model, &proof, d + delta / 2.0).unwrap_err().kind(),
            "InsufficientImprovement"
        );
        assert_eq!(
            verify(&model, &proof, &fx.f, &fx.y_t, 1.0, -0.1, &fx.verifier).unwrap_err().kind(),
            "ContractViolation"
        );
    }

    #[test]
    fn wire_and_json_round_trip() {
        let fx = fixture();
        let model = ModelArtifact::new(fx.x_t.clone(), "m");
        let proof = prove(&model, &fx.f, &fx.prover).unwrap();
        let wire = proof.to_wire();
        let back = PoiProof::from_wire(&wire).unwrap();
        assert_eq!(back, proof);
        assert_eq!(back.to_wire(), wire);
        assert_eq!(PoiProof::from_json(&proof.to_json()).unwrap(), proof);

        let v = verify(&model, &proof, &fx.f, &fx.y_t, 0.5, 0.005, &fx.verifier).unwrap();
        let vw = v.to_wire();
        assert_eq!(VerificationProof::from_wire(&vw).unwrap().to_wire(), vw);
        assert_eq!(VerificationProof::from_json(&v.to_json()).unwrap(), v);
        assert!(PoiProof::from_wire(&wire[..wire.len() - 1]).is_err());
    }

    #[test]
    fn wrong_shape_is_contract_violation() {
        let fx = fixture();
        let model = ModelArtifact::new(LabelVector::new(vec![1; 39], 5).unwrap(), "short");
        assert_eq!(prove(&model, &fx.f, &fx.prover).unwrap_err().kind(), "ContractViolation");
    }
}
