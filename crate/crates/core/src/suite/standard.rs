//! `std-v1`: SHA-256, Ed25519 signatures, ECIES over ristretto255 with
//! ChaCha20-Poly1305, HMAC-SHA-256 and a ChaCha20 keystream.

use chacha20::cipher::{KeyIvInit, StreamCipher};
use chacha20::ChaCha20;
use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::ChaCha20Poly1305;
use curve25519_dalek::constants::RISTRETTO_BASEPOINT_TABLE;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use ed25519_dalek::{Signer, SigningKey, VerifyingKey};
use hmac::{Hmac, Mac};
use rand_core::RngCore;
use sha2::{Digest as _, Sha256};

use super::{
    CryptoError, CryptoSuite, Digest, DhElement, KeyKind, Keypair, Signature, SuiteId,
    AEAD_NONCE_LEN, SYMMETRIC_KEY_LEN,
};

const SCALAR_LEN: usize = 32;
const POINT_LEN: usize = 32;
const ECIES_LABEL: &[u8] = b"std-v1/ecies";

#[derive(Debug, Default, Clone, Copy)]
pub struct StandardSuite;

fn random_scalar(rng: &mut dyn RngCore) -> Scalar {
    loop {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        let s = Scalar::from_bytes_mod_order_wide(&wide);
        if s != Scalar::ZERO {
            return s;
        }
    }
}

fn scalar_from_secret(secret: &[u8]) -> Result<Scalar, CryptoError> {
    let bytes: [u8; SCALAR_LEN] = secret.try_into().map_err(|_| CryptoError::InvalidKey)?;
    let s = Scalar::from_bytes_mod_order(bytes);
    if s == Scalar::ZERO {
        return Err(CryptoError::InvalidKey);
    }
    Ok(s)
}

/// Decodes a canonical, non-identity ristretto255 point.
fn decode_point(bytes: &[u8]) -> Result<RistrettoPoint, CryptoError> {
    let compressed =
        CompressedRistretto::from_slice(bytes).map_err(|_| CryptoError::InvalidGroupElement)?;
    let point = compressed
        .decompress()
        .ok_or(CryptoError::InvalidGroupElement)?;
    if point == RistrettoPoint::identity() {
        return Err(CryptoError::InvalidGroupElement);
    }
    Ok(point)
}

fn ecies_key(ephemeral: &[u8], public: &[u8], shared: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(ECIES_LABEL);
    h.update(ephemeral);
    h.update(public);
    h.update(shared);
    h.finalize().into()
}

impl CryptoSuite for StandardSuite {
    fn id(&self) -> SuiteId {
        SuiteId::Standard
    }

    fn digest_len(&self) -> usize {
        32
    }

    fn secret_len(&self) -> usize {
        SCALAR_LEN
    }

    fn element_len(&self) -> usize {
        POINT_LEN
    }

    fn hash(&self, data: &[u8]) -> Digest {
        Digest::from_bytes(Sha256::digest(data).to_vec())
    }

    fn generate_keypair(&self, kind: KeyKind, rng: &mut dyn RngCore) -> Keypair {
        let secret = match kind {
            KeyKind::Signing => {
                let mut seed = [0u8; 32];
                rng.fill_bytes(&mut seed);
                seed.to_vec()
            }
            KeyKind::Encryption | KeyKind::Dh => random_scalar(rng).to_bytes().to_vec(),
        };
        self.keypair_from_secret(kind, &secret)
            .expect("freshly generated secret is valid")
    }

    fn keypair_from_secret(&self, kind: KeyKind, secret: &[u8]) -> Result<Keypair, CryptoError> {
        let public = match kind {
            KeyKind::Signing => {
                let seed: [u8; 32] = secret.try_into().map_err(|_| CryptoError::InvalidKey)?;
                SigningKey::from_bytes(&seed)
                    .verifying_key()
                    .to_bytes()
                    .to_vec()
            }
            KeyKind::Encryption | KeyKind::Dh => {
                let s = scalar_from_secret(secret)?;
                (&s * RISTRETTO_BASEPOINT_TABLE)
                    .compress()
                    .to_bytes()
                    .to_vec()
            }
        };
        Ok(Keypair::new(kind, public, secret.to_vec()))
    }

    fn sign(&self, secret: &[u8], digest: &Digest) -> Result<Signature, CryptoError> {
        let seed: [u8; 32] = secret.try_into().map_err(|_| CryptoError::InvalidKey)?;
        let key = SigningKey::from_bytes(&seed);
        Ok(Signature::from_bytes(
            key.sign(digest.as_bytes()).to_bytes().to_vec(),
        ))
    }

    fn verify(&self, public: &[u8], digest: &Digest, signature: &[u8]) -> bool {
        let Ok(public) = <[u8; 32]>::try_from(public) else {
            return false;
        };
        let Ok(key) = VerifyingKey::from_bytes(&public) else {
            return false;
        };
        let Ok(sig) = ed25519_dalek::Signature::from_slice(signature) else {
            return false;
        };
        key.verify_strict(digest.as_bytes(), &sig).is_ok()
    }

    fn pk_encrypt(
        &self,
        public: &[u8],
        plaintext: &[u8],
        rng: &mut dyn RngCore,
    ) -> Result<Vec<u8>, CryptoError> {
        let recipient = decode_point(public).map_err(|_| CryptoError::InvalidKey)?;
        let r = random_scalar(rng);
        let ephemeral = (&r * RISTRETTO_BASEPOINT_TABLE).compress().to_bytes();
        let shared = (r * recipient).compress().to_bytes();
        let key = ecies_key(&ephemeral, public, &shared);
        let mut aad = ephemeral.to_vec();
        aad.extend_from_slice(public);
        let body = ChaCha20Poly1305::new(&key.into())
            .encrypt(
                &[0u8; AEAD_NONCE_LEN].into(),
                Payload {
                    msg: plaintext,
                    aad: &aad,
                },
            )
            .expect("chacha20poly1305 encryption is infallible for in-memory buffers");
        let mut out = ephemeral.to_vec();
        out.extend_from_slice(&body);
        Ok(out)
    }

    fn pk_decrypt(&self, secret: &[u8], ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
        let s = scalar_from_secret(secret).map_err(|_| CryptoError::DecryptFailure)?;
        if ciphertext.len() < POINT_LEN + 16 {
            return Err(CryptoError::DecryptFailure);
        }
        let (ephemeral, body) = ciphertext.split_at(POINT_LEN);
        let point = decode_point(ephemeral).map_err(|_| CryptoError::DecryptFailure)?;
        let public = (&s * RISTRETTO_BASEPOINT_TABLE).compress().to_bytes();
        let shared = (s * point).compress().to_bytes();
        let key = ecies_key(ephemeral, &public, &shared);
        let mut aad = ephemeral.to_vec();
        aad.extend_from_slice(&public);
        ChaCha20Poly1305::new(&key.into())
            .decrypt(
                &[0u8; AEAD_NONCE_LEN].into(),
                Payload { msg: body, aad: &aad },
            )
            .map_err(|_| CryptoError::DecryptFailure)
    }

    fn keystream(&self, seed: &[u8], len: usize) -> Vec<u8> {
        let key: [u8; 32] = Sha256::digest(seed).into();
        let mut out = vec![0u8; len];
        ChaCha20::new(&key.into(), &[0u8; 12].into()).apply_keystream(&mut out);
        out
    }

    fn mac(&self, key: &[u8], data: &[u8]) -> Vec<u8> {
        let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("hmac accepts any key length");
        mac.update(data);
        mac.finalize().into_bytes().to_vec()
    }

    fn aead_seal(
        &self,
        key: &[u8; SYMMETRIC_KEY_LEN],
        nonce: &[u8; AEAD_NONCE_LEN],
        aad: &[u8],
        plaintext: &[u8],
    ) -> Vec<u8> {
        ChaCha20Poly1305::new(key.into())
            .encrypt(nonce.into(), Payload { msg: plaintext, aad })
            .expect("chacha20poly1305 encryption is infallible for in-memory buffers")
    }

    fn aead_open(
        &self,
        key: &[u8; SYMMETRIC_KEY_LEN],
        nonce: &[u8; AEAD_NONCE_LEN],
        aad: &[u8],
        ciphertext: &[u8],
    ) -> Result<Vec<u8>, CryptoError> {
        ChaCha20Poly1305::new(key.into())
            .decrypt(nonce.into(), Payload { msg: ciphertext, aad })
            .map_err(|_| CryptoError::DecryptFailure)
    }

    fn dh_keygen(&self, rng: &mut dyn RngCore) -> DhElement {
        let x = random_scalar(rng);
        let value = (&x * RISTRETTO_BASEPOINT_TABLE).compress().to_bytes().to_vec();
        DhElement::new(value, Some(x.to_bytes().to_vec()))
    }

    fn dh_from_exponent(&self, exponent: &[u8]) -> Result<DhElement, CryptoError> {
        let x = scalar_from_secret(exponent)?;
        let value = (&x * RISTRETTO_BASEPOINT_TABLE).compress().to_bytes().to_vec();
        Ok(DhElement::new(value, Some(exponent.to_vec())))
    }

    fn dh_validate(&self, value: &[u8]) -> Result<(), CryptoError> {
        decode_point(value).map(|_| ())
    }

    fn dh_shared(&self, own: &DhElement, peer: &[u8]) -> Result<Vec<u8>, CryptoError> {
        let x = scalar_from_secret(own.exponent().ok_or(CryptoError::InvalidKey)?)?;
        let point = decode_point(peer)?;
        Ok((x * point).compress().to_bytes().to_vec())
    }
}
