//! Cryptographic primitives behind a single object-safe suite interface.
//!
//! Protocol code only ever talks to `&dyn CryptoSuite`; the concrete
//! algorithms are picked at run time by [`SuiteId`] and recorded in every
//! transcript header.

use std::fmt;
use std::str::FromStr;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod standard;
pub mod toy;

pub use standard::StandardSuite;
pub use toy::ToySuite;

/// Length of every symmetric key handed to [`CryptoSuite::aead_seal`] and
/// produced by [`CryptoSuite::kdf`].
pub const SYMMETRIC_KEY_LEN: usize = 32;

/// Length of the nonce taken by the AEAD operations.
pub const AEAD_NONCE_LEN: usize = 12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("decryption failed")]
    DecryptFailure,
    #[error("invalid group element")]
    InvalidGroupElement,
    #[error("invalid key encoding")]
    InvalidKey,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SuiteId {
    #[serde(rename = "toy-v1")]
    Toy,
    #[serde(rename = "std-v1")]
    Standard,
}

static TOY: ToySuite = ToySuite;
static STANDARD: StandardSuite = StandardSuite;

impl SuiteId {
    pub const ALL: [SuiteId; 2] = [SuiteId::Toy, SuiteId::Standard];

    pub fn as_str(self) -> &'static str {
        match self {
            SuiteId::Toy => "toy-v1",
            SuiteId::Standard => "std-v1",
        }
    }

    pub fn suite(self) -> &'static dyn CryptoSuite {
        match self {
            SuiteId::Toy => &TOY,
            SuiteId::Standard => &STANDARD,
        }
    }
}

impl fmt::Display for SuiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SuiteId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| format!("unknown suite `{s}` (expected one of: toy-v1, std-v1)"))
    }
}

/// Output of [`CryptoSuite::hash`]. Length is fixed per suite.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(Vec<u8>);

impl Digest {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Digest(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", hex::encode(&self.0))
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

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", hex::encode(&self.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KeyKind {
    Signing,
    Encryption,
    Dh,
}

/// A long-term keypair. The secret half never appears in any serialized
/// frame or certificate, and is hidden from `Debug` output.
#[derive(Clone, PartialEq, Eq)]
pub struct Keypair {
    kind: KeyKind,
    public: Vec<u8>,
    secret: Vec<u8>,
}

impl Keypair {
    pub(crate) fn new(kind: KeyKind, public: Vec<u8>, secret: Vec<u8>) -> Self {
        Keypair {
            kind,
            public,
            secret,
        }
    }

    pub fn kind(&self) -> KeyKind {
        self.kind
    }

    pub fn public(&self) -> &[u8] {
        &self.public
    }

    pub fn secret(&self) -> &[u8] {
        &self.secret
    }
}

impl fmt::Debug for Keypair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Keypair")
            .field("kind", &self.kind)
            .field("public", &hex::encode(&self.public))
            .finish_non_exhaustive()
    }
}

/// A Diffie-Hellman group element. Locally generated elements keep their
/// exponent; elements received from a peer do not.
#[derive(Clone, PartialEq, Eq)]
pub struct DhElement {
    value: Vec<u8>,
    exponent: Option<Vec<u8>>,
}

impl DhElement {
    pub(crate) fn new(value: Vec<u8>, exponent: Option<Vec<u8>>) -> Self {
        DhElement { value, exponent }
    }

    /// Wraps a peer element. The encoding is not checked here; call
    /// [`CryptoSuite::dh_validate`] before use.
    pub fn public(value: Vec<u8>) -> Self {
        DhElement {
            value,
            exponent: None,
        }
    }

    pub fn value(&self) -> &[u8] {
        &self.value
    }

    pub fn exponent(&self) -> Option<&[u8]> {
        self.exponent.as_deref()
    }

    /// Drops the exponent, keeping only the public value.
    pub fn forget_exponent(&mut self) {
        self.exponent = None;
    }
}

impl fmt::Debug for DhElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DhElement")
            .field("value", &hex::encode(&self.value))
            .field("has_exponent", &self.exponent.is_some())
            .finish()
    }
}

pub trait CryptoSuite: Send + Sync + fmt::Debug {
    fn id(&self) -> SuiteId;

    fn digest_len(&self) -> usize;

    /// Length of secret-key encodings for signing and encryption keys.
    fn secret_len(&self) -> usize;

    /// Length of a DH element encoding (and of a DH exponent encoding).
    fn element_len(&self) -> usize;

    fn hash(&self, data: &[u8]) -> Digest;

    fn generate_keypair(&self, kind: KeyKind, rng: &mut dyn RngCore) -> Keypair;

    /// Rebuilds a keypair from its secret half.
    fn keypair_from_secret(&self, kind: KeyKind, secret: &[u8]) -> Result<Keypair, CryptoError>;

    fn sign(&self, secret: &[u8], digest: &Digest) -> Result<Signature, CryptoError>;

    /// Never panics; any malformed input yields `false`.
    fn verify(&self, public: &[u8], digest: &Digest, signature: &[u8]) -> bool;

    fn pk_encrypt(
        &self,
        public: &[u8],
        plaintext: &[u8],
        rng: &mut dyn RngCore,
    ) -> Result<Vec<u8>, CryptoError>;

    /// Authenticated: a wrong key or tampered ciphertext is always
    /// [`CryptoError::DecryptFailure`].
    fn pk_decrypt(&self, secret: &[u8], ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError>;

    /// Deterministic pseudo-random octets; `keystream(s, n)` is a prefix of
    /// `keystream(s, n + k)`.
    fn keystream(&self, seed: &[u8], len: usize) -> Vec<u8>;

    fn mac(&self, key: &[u8], data: &[u8]) -> Vec<u8>;

    fn aead_seal(
        &self,
        key: &[u8; SYMMETRIC_KEY_LEN],
        nonce: &[u8; AEAD_NONCE_LEN],
        aad: &[u8],
        plaintext: &[u8],
    ) -> Vec<u8>;

    fn aead_open(
        &self,
        key: &[u8; SYMMETRIC_KEY_LEN],
        nonce: &[u8; AEAD_NONCE_LEN],
        aad: &[u8],
        ciphertext: &[u8],
    ) -> Result<Vec<u8>, CryptoError>;

    fn dh_keygen(&self, rng: &mut dyn RngCore) -> DhElement;

    fn dh_from_exponent(&self, exponent: &[u8]) -> Result<DhElement, CryptoError>;

    /// Rejects non-canonical encodings and degenerate elements (identity,
    /// small order).
    fn dh_validate(&self, value: &[u8]) -> Result<(), CryptoError>;

    fn dh_shared(&self, own: &DhElement, peer: &[u8]) -> Result<Vec<u8>, CryptoError>;

    /// Derives a 32-octet key from `label ‖ input`. When the digest is at
    /// least 32 octets this is `hash(label ‖ input)` truncated; shorter
    /// digests are chained `block_{i+1} = hash(block_i ‖ label ‖ input)`.
    fn kdf(&self, label: &[u8], input: &[u8]) -> [u8; SYMMETRIC_KEY_LEN] {
        let mut seed = Vec::with_capacity(label.len() + input.len());
        seed.extend_from_slice(label);
        seed.extend_from_slice(input);
        let mut out = Vec::with_capacity(SYMMETRIC_KEY_LEN + self.digest_len());
        let mut block = self.hash(&seed).into_bytes();
        loop {
            out.extend_from_slice(&block);
            if out.len() >= SYMMETRIC_KEY_LEN {
                break;
            }
            let mut next = block.clone();
            next.extend_from_slice(&seed);
            block = self.hash(&next).into_bytes();
        }
        let mut key = [0u8; SYMMETRIC_KEY_LEN];
        key.copy_from_slice(&out[..SYMMETRIC_KEY_LEN]);
        key
    }
}

pub(crate) fn xor_in_place(data: &mut [u8], stream: &[u8]) {
    for (d, s) in data.iter_mut().zip(stream) {
        *d ^= s;
    }
}

pub(crate) fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}
