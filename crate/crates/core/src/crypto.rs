//! Hashing, identity keys and signatures shared by every peer.
//!
//! Digests are SHA-256. Identities are Ed25519 key pairs derived from a
//! 32-byte seed so that simulations are reproducible; the printable
//! identity id is a pure function of the verify key.

use std::fmt;

use ed25519_dalek::{Signer, Verifier};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

pub const DIGEST_LEN: usize = 32;
pub const SEED_LEN: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CryptoError {
    #[error("seed must be {SEED_LEN} bytes, got {0}")]
    BadSeedLength(usize),
    #[error("malformed hex digest: {0}")]
    BadDigest(String),
    #[error("malformed verify key")]
    BadVerifyKey,
}

/// A 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest([u8; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; DIGEST_LEN]);

    pub fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Self {
        Digest(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let raw = hex::decode(s).map_err(|_| CryptoError::BadDigest(s.to_owned()))?;
        let bytes: [u8; DIGEST_LEN] = raw
            .try_into()
            .map_err(|_| CryptoError::BadDigest(s.to_owned()))?;
        Ok(Digest(bytes))
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Digest::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// SHA-256 of `data`.
pub fn hash(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// Public half of an identity.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct VerifyKey([u8; 32]);

impl VerifyKey {
    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Printable id derived from the key bytes.
    pub fn identity_id(&self) -> String {
        format!("id-{}", &hash(&self.0).to_hex()[..16])
    }
}

impl fmt::Debug for VerifyKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VerifyKey({})", hex::encode(self.0))
    }
}

/// Secret half of an identity.
#[derive(Clone)]
pub struct SigningKey(ed25519_dalek::SigningKey);

impl fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SigningKey(..)")
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Signature(Vec<u8>);

impl Signature {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Signature(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", hex::encode(&self.0))
    }
}

impl Serialize for Signature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&hex::encode(&self.0))
    }
}

impl<'de> Deserialize<'de> for Signature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        hex::decode(&s)
            .map(Signature)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug)]
pub struct IdentityKeys {
    pub signing_key: SigningKey,
    pub verify_key: VerifyKey,
    pub identity_id: String,
}

/// Deterministically derive a key pair from a 32-byte seed.
pub fn generate_identity(seed: &[u8]) -> Result<IdentityKeys, CryptoError> {
    let seed: [u8; SEED_LEN] = seed
        .try_into()
        .map_err(|_| CryptoError::BadSeedLength(seed.len()))?;
    let sk = ed25519_dalek::SigningKey::from_bytes(&seed);
    let verify_key = VerifyKey(sk.verifying_key().to_bytes());
    Ok(IdentityKeys {
        identity_id: verify_key.identity_id(),
        verify_key,
        signing_key: SigningKey(sk),
    })
}

/// Convenience for simulations: derive a seed from a label.
pub fn seed_from_label(domain: &[u8], label: &str) -> [u8; SEED_LEN] {
    let mut buf = domain.to_vec();
    buf.push(0);
    buf.extend_from_slice(label.as_bytes());
    *hash(&buf).as_bytes()
}

pub fn sign(signing_key: &SigningKey, message: &[u8]) -> Signature {
    Signature(signing_key.0.sign(message).to_bytes().to_vec())
}

/// True iff `signature` was produced by the signing key matching
/// `verify_key` over exactly `message`.
pub fn verify(verify_key: &VerifyKey, message: &[u8], signature: &Signature) -> bool {
    let Ok(vk) = ed25519_dalek::VerifyingKey::from_bytes(&verify_key.0) else {
        return false;
    };
    let Ok(sig) = ed25519_dalek::Signature::from_slice(&signature.0) else {
        return false;
    };
    vk.verify(message, &sig).is_ok()
}
