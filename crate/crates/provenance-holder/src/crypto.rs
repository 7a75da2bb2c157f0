//! ed25519 signing primitives.
//!
//! Keys and signatures are deliberately small: 32-byte public keys,
//! 32-byte secrets, 64-byte signatures. Signing is deterministic, so the
//! same key and payload always produce the same signature bytes.

use ed25519_dalek::{Signer as _, Verifier as _};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::SignatureBytes;

/// Length of an ed25519 secret seed and public key.
pub const KEY_LEN: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("secret key must be {KEY_LEN} bytes, got {0}")]
    MalformedSecretKey(usize),
    #[error("public key must be {KEY_LEN} bytes, got {0}")]
    MalformedKey(usize),
    #[error("signature must be 64 bytes, got {0}")]
    MalformedSignature(usize),
}

/// A participant keypair. The secret seed stays with the participant;
/// only the public half is ever registered or stored.
#[derive(Clone, Serialize, Deserialize)]
pub struct Keypair {
    #[serde(with = "hex_arr32")]
    pub secret_key: [u8; KEY_LEN],
    #[serde(with = "hex_arr32")]
    pub public_key: [u8; KEY_LEN],
}

impl std::fmt::Debug for Keypair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Never print the secret half.
        f.debug_struct("Keypair")
            .field("public_key", &hex::encode(self.public_key))
            .finish_non_exhaustive()
    }
}

impl Keypair {
    /// Derive a keypair from a 32-byte seed. Any seed is valid.
    pub fn from_seed(seed: [u8; KEY_LEN]) -> Self {
        let signing = ed25519_dalek::SigningKey::from_bytes(&seed);
        Keypair {
            secret_key: seed,
            public_key: signing.verifying_key().to_bytes(),
        }
    }

    /// Generate a fresh random keypair.
    pub fn generate<R: rand::CryptoRng + rand::RngCore>(rng: &mut R) -> Self {
        let mut seed = [0u8; KEY_LEN];
        rng.fill_bytes(&mut seed);
        Self::from_seed(seed)
    }
}

/// Sign a payload with an ed25519 secret key (32-byte seed).
pub fn sign_payload(secret_key: &[u8], payload: &[u8]) -> Result<SignatureBytes, CryptoError> {
    let seed: [u8; KEY_LEN] = secret_key
        .try_into()
        .map_err(|_| CryptoError::MalformedSecretKey(secret_key.len()))?;
    let signing = ed25519_dalek::SigningKey::from_bytes(&seed);
    Ok(SignatureBytes(signing.sign(payload).to_bytes()))
}

/// Verify an ed25519 signature. Wrong-length inputs are errors; a
/// well-formed but non-matching signature (or a public key that is not a
/// valid curve point) is simply `false`.
pub fn verify_signature(
    public_key: &[u8],
    payload: &[u8],
    signature: &[u8],
) -> Result<bool, CryptoError> {
    let pk: [u8; KEY_LEN] = public_key
        .try_into()
        .map_err(|_| CryptoError::MalformedKey(public_key.len()))?;
    let sig: [u8; 64] = signature
        .try_into()
        .map_err(|_| CryptoError::MalformedSignature(signature.len()))?;
    let Ok(verifying) = ed25519_dalek::VerifyingKey::from_bytes(&pk) else {
        return Ok(false);
    };
    let sig = ed25519_dalek::Signature::from_bytes(&sig);
    Ok(verifying.verify(payload, &sig).is_ok())
}

pub(crate) mod hex_arr32 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8; 32], ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(de)?;
        let v = hex::decode(s.trim()).map_err(serde::de::Error::custom)?;
        v.try_into()
            .map_err(|v: Vec<u8>| serde::de::Error::custom(format!("expected 32 bytes, got {}", v.len())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // RFC 8032 section 7.1, test vector 1 (empty message).
    const SEED_HEX: &str = "9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60";
    const PUB_HEX: &str = "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a";
    const SIG_HEX: &str = "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39701cf9b46bd25bf5f0595bbe24655141438e7a100b";

    #[test]
    fn rfc8032_vector_1() {
        let seed: [u8; 32] = hex::decode(SEED_HEX).unwrap().try_into().unwrap();
        let kp = Keypair::from_seed(seed);
        assert_eq!(hex::encode(kp.public_key), PUB_HEX);
        let sig = sign_payload(&kp.secret_key, b"").unwrap();
        assert_eq!(sig.to_hex(), SIG_HEX);
        assert!(verify_signature(&kp.public_key, b"", sig.as_bytes()).unwrap());
    }

    #[test]
    fn sign_verify_roundtrip() {
        let kp = Keypair::from_seed([42u8; 32]);
        let sig = sign_payload(&kp.secret_key, b"payload").unwrap();
        assert!(verify_signature(&kp.public_key, b"payload", sig.as_bytes()).unwrap());
    }

    #[test]
    fn verify_fails_under_other_key() {
        let kp = Keypair::from_seed([1u8; 32]);
        let other = Keypair::from_seed([2u8; 32]);
        let sig = sign_payload(&kp.secret_key, b"payload").unwrap();
        assert!(!verify_signature(&other.public_key, b"payload", sig.as_bytes()).unwrap());
    }

    #[test]
    fn verify_fails_on_flipped_bits() {
        let kp = Keypair::from_seed([3u8; 32]);
        let payload = b"some payload".to_vec();
        let sig = sign_payload(&kp.secret_key, &payload).unwrap();

        let mut bad_payload = payload.clone();
        bad_payload[0] ^= 1;
        assert!(!verify_signature(&kp.public_key, &bad_payload, sig.as_bytes()).unwrap());

        let mut bad_sig = *sig.as_bytes();
        bad_sig[10] ^= 1;
        assert!(!verify_signature(&kp.public_key, &payload, &bad_sig).unwrap());
    }

    #[test]
    fn wrong_lengths_are_errors() {
        assert_eq!(
            sign_payload(&[0u8; 31], b""),
            Err(CryptoError::MalformedSecretKey(31))
        );
        assert_eq!(
            verify_signature(&[0u8; 33], b"", &[0u8; 64]),
            Err(CryptoError::MalformedKey(33))
        );
        assert_eq!(
            verify_signature(&[0u8; 32], b"", &[0u8; 63]),
            Err(CryptoError::MalformedSignature(63))
        );
    }

    #[test]
    fn signature_soundness_over_random_keys() {
        use rand::{RngCore, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(0x5157);
        for round in 0..1000 {
            let kp = Keypair::generate(&mut rng);
            let mut payload = vec![0u8; 16 + (round % 48)];
            rng.fill_bytes(&mut payload);
            let sig = sign_payload(&kp.secret_key, &payload).unwrap();
            assert!(verify_signature(&kp.public_key, &payload, sig.as_bytes()).unwrap());

            // Single-bit mutations of payload and signature must fail.
            let bit = (round * 7) % (payload.len() * 8);
            let mut mutated = payload.clone();
            mutated[bit / 8] ^= 1 << (bit % 8);
            assert!(!verify_signature(&kp.public_key, &mutated, sig.as_bytes()).unwrap());

            let sig_bit = (round * 13) % (64 * 8);
            let mut mutated_sig = *sig.as_bytes();
            mutated_sig[sig_bit / 8] ^= 1 << (sig_bit % 8);
            assert!(!verify_signature(&kp.public_key, &payload, &mutated_sig).unwrap());
        }
    }
}
