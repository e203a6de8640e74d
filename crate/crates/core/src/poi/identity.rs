use std::fmt;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use rand::Rng;

use super::{Address, PoiError};

pub type PublicKey = [u8; 32];
pub type SignatureBytes = [u8; 64];

/// An Ed25519 key pair and its derived address. The secret key never
/// appears in proofs or in `Debug` output.
#[derive(Clone)]
pub struct PeerIdentity {
    signing: SigningKey,
    public_key: PublicKey,
    address: Address,
}

pub fn keygen<R: Rng + ?Sized>(rng: &mut R) -> PeerIdentity {
    let mut secret = [0u8; 32];
    rng.fill(&mut secret);
    PeerIdentity::from_secret_bytes(&secret)
}

impl PeerIdentity {
    pub fn from_secret_bytes(secret: &[u8; 32]) -> Self {
        let signing = SigningKey::from_bytes(secret);
        let public_key = signing.verifying_key().to_bytes();
        Self {
            signing,
            public_key,
            address: Address::of_public_key(&public_key),
        }
    }

    pub fn secret_bytes(&self) -> [u8; 32] {
        self.signing.to_bytes()
    }

    pub fn public_key(&self) -> &PublicKey {
        &self.public_key
    }

    pub fn address(&self) -> Address {
        self.address
    }

    pub fn sign(&self, message: &[u8]) -> SignatureBytes {
        self.signing.sign(message).to_bytes()
    }
}

impl fmt::Debug for PeerIdentity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeerIdentity")
            .field("address", &self.address)
            .finish_non_exhaustive()
    }
}

/// Strict Ed25519 verification (rejects small-order keys and
/// non-canonical signatures).
pub fn verify_signature(public_key: &PublicKey, message: &[u8], signature: &SignatureBytes) -> Result<(), PoiError> {
    let key = VerifyingKey::from_bytes(public_key)
        .map_err(|e| PoiError::BadSignature(format!("invalid public key: {e}")))?;
    key.verify_strict(message, &Signature::from_bytes(signature))
        .map_err(|_| PoiError::BadSignature("signature does not verify".into()))
}
