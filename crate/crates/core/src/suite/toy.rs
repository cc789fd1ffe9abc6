//! `toy-v1`: the multiplicative group modulo 1019 with generator 2,
//! 16-octet truncated SHA-256 digests, Schnorr signatures and hashed
//! ElGamal. Only useful for small, hand-checkable vectors.

use hmac::{Hmac, Mac};
use rand_core::RngCore;
use sha2::{Digest as _, Sha256};

use super::{
    ct_eq, xor_in_place, CryptoError, CryptoSuite, Digest, DhElement, KeyKind, Keypair,
    Signature, SuiteId, AEAD_NONCE_LEN, SYMMETRIC_KEY_LEN,
};

pub const MODULUS: u32 = 1019;
pub const GENERATOR: u32 = 2;
/// Order of the generator (2 is a quadratic non-residue mod 1019).
pub const ORDER: u32 = MODULUS - 1;

const DIGEST_LEN: usize = 16;
const ELEMENT_LEN: usize = 2;
const TAG_LEN: usize = 16;
const SIGNATURE_LEN: usize = DIGEST_LEN + ELEMENT_LEN;

#[derive(Debug, Default, Clone, Copy)]
pub struct ToySuite;

pub fn mod_pow(base: u32, exp: u32) -> u32 {
    let m = MODULUS as u64;
    let mut result = 1u64;
    let mut b = base as u64 % m;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            result = result * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    result as u32
}

fn encode(v: u32) -> Vec<u8> {
    (v as u16).to_be_bytes().to_vec()
}

fn decode(bytes: &[u8]) -> Option<u32> {
    let arr: [u8; ELEMENT_LEN] = bytes.try_into().ok()?;
    Some(u16::from_be_bytes(arr) as u32)
}

/// Elements 0, 1 and p−1 (order 2) and anything ≥ p are rejected.
fn valid_element(v: u32) -> bool {
    v > 1 && v < MODULUS - 1
}

/// Exponents whose public value would be degenerate are not valid secrets.
fn valid_exponent(x: u32) -> bool {
    x > 0 && x < ORDER && x != ORDER / 2
}

fn decode_element(bytes: &[u8]) -> Result<u32, CryptoError> {
    decode(bytes)
        .filter(|&v| valid_element(v))
        .ok_or(CryptoError::InvalidGroupElement)
}

fn decode_exponent(bytes: &[u8]) -> Result<u32, CryptoError> {
    decode(bytes)
        .filter(|&x| valid_exponent(x))
        .ok_or(CryptoError::InvalidKey)
}

fn random_exponent(rng: &mut dyn RngCore) -> u32 {
    loop {
        let x = rng.next_u32() % ORDER;
        if valid_exponent(x) {
            return x;
        }
    }
}

fn truncated_sha256(parts: &[&[u8]]) -> Vec<u8> {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize()[..DIGEST_LEN].to_vec()
}

fn reduce(bytes: &[u8]) -> u32 {
    bytes
        .iter()
        .fold(0u64, |acc, &b| (acc * 256 + b as u64) % ORDER as u64) as u32
}

impl ToySuite {
    fn challenge(&self, commitment: u32, public: &[u8], digest: &Digest) -> Vec<u8> {
        truncated_sha256(&[b"toy-v1/schnorr", &encode(commitment), public, digest.as_bytes()])
    }

    fn enc_key(&self, ephemeral: &[u8], public: &[u8], shared: &[u8]) -> Vec<u8> {
        truncated_sha256(&[b"toy-v1/enc", ephemeral, public, shared])
    }
}

impl CryptoSuite for ToySuite {
    fn id(&self) -> SuiteId {
        SuiteId::Toy
    }

    fn digest_len(&self) -> usize {
        DIGEST_LEN
    }

    fn secret_len(&self) -> usize {
        ELEMENT_LEN
    }

    fn element_len(&self) -> usize {
        ELEMENT_LEN
    }

    fn hash(&self, data: &[u8]) -> Digest {
        Digest::from_bytes(truncated_sha256(&[data]))
    }

    fn generate_keypair(&self, kind: KeyKind, rng: &mut dyn RngCore) -> Keypair {
        let x = random_exponent(rng);
        self.keypair_from_secret(kind, &encode(x))
            .expect("freshly generated exponent is valid")
    }

    fn keypair_from_secret(&self, kind: KeyKind, secret: &[u8]) -> Result<Keypair, CryptoError> {
        let x = decode_exponent(secret)?;
        Ok(Keypair::new(
            kind,
            encode(mod_pow(GENERATOR, x)),
            secret.to_vec(),
        ))
    }

    fn sign(&self, secret: &[u8], digest: &Digest) -> Result<Signature, CryptoError> {
        let x = decode_exponent(secret)?;
        let public = encode(mod_pow(GENERATOR, x));
        // deterministic nonce
        let mut k = reduce(&truncated_sha256(&[b"toy-v1/nonce", secret, digest.as_bytes()]));
        if k == 0 {
            k = 1;
        }
        let commitment = mod_pow(GENERATOR, k);
        let e = self.challenge(commitment, &public, digest);
        let s = (k as u64 + reduce(&e) as u64 * x as u64) % ORDER as u64;
        let mut sig = e;
        sig.extend_from_slice(&encode(s as u32));
        Ok(Signature::from_bytes(sig))
    }

    fn verify(&self, public: &[u8], digest: &Digest, signature: &[u8]) -> bool {
        if signature.len() != SIGNATURE_LEN {
            return false;
        }
        let Ok(y) = decode_element(public) else {
            return false;
        };
        let (e, s) = signature.split_at(DIGEST_LEN);
        let Some(s) = decode(s).filter(|&s| s < ORDER) else {
            return false;
        };
        let neg_e = (ORDER - reduce(e)) % ORDER;
        let commitment =
            (mod_pow(GENERATOR, s) as u64 * mod_pow(y, neg_e) as u64 % MODULUS as u64) as u32;
        ct_eq(&self.challenge(commitment, public, digest), e)
    }

    fn pk_encrypt(
        &self,
        public: &[u8],
        plaintext: &[u8],
        rng: &mut dyn RngCore,
    ) -> Result<Vec<u8>, CryptoError> {
        let y = decode_element(public).map_err(|_| CryptoError::InvalidKey)?;
        let k = random_exponent(rng);
        let ephemeral = encode(mod_pow(GENERATOR, k));
        let shared = encode(mod_pow(y, k));
        let key = self.enc_key(&ephemeral, public, &shared);
        let mut body = plaintext.to_vec();
        let ks = self.keystream(&key, body.len());
        xor_in_place(&mut body, &ks);
        let mut tagged = ephemeral.clone();
        tagged.extend_from_slice(&body);
        let tag = self.mac(&key, &tagged);
        tagged.extend_from_slice(&tag);
        Ok(tagged)
    }

    fn pk_decrypt(&self, secret: &[u8], ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
        let x = decode_exponent(secret).map_err(|_| CryptoError::DecryptFailure)?;
        if ciphertext.len() < ELEMENT_LEN + TAG_LEN {
            return Err(CryptoError::DecryptFailure);
        }
        let (ephemeral, rest) = ciphertext.split_at(ELEMENT_LEN);
        let (body, tag) = rest.split_at(rest.len() - TAG_LEN);
        let c1 = decode_element(ephemeral).map_err(|_| CryptoError::DecryptFailure)?;
        let public = encode(mod_pow(GENERATOR, x));
        let shared = encode(mod_pow(c1, x));
        let key = self.enc_key(ephemeral, &public, &shared);
        if !ct_eq(&self.mac(&key, &ciphertext[..ciphertext.len() - TAG_LEN]), tag) {
            return Err(CryptoError::DecryptFailure);
        }
        let mut plain = body.to_vec();
        let ks = self.keystream(&key, plain.len());
        xor_in_place(&mut plain, &ks);
        Ok(plain)
    }

    fn keystream(&self, seed: &[u8], len: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(len + 32);
        let mut counter = 0u64;
        while out.len() < len {
            let mut h = Sha256::new();
            h.update(seed);
            h.update(counter.to_be_bytes());
            out.extend_from_slice(&h.finalize());
            counter += 1;
        }
        out.truncate(len);
        out
    }

    fn mac(&self, key: &[u8], data: &[u8]) -> Vec<u8> {
        let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("hmac accepts any key length");
        mac.update(data);
        mac.finalize().into_bytes()[..TAG_LEN].to_vec()
    }

    fn aead_seal(
        &self,
        key: &[u8; SYMMETRIC_KEY_LEN],
        nonce: &[u8; AEAD_NONCE_LEN],
        aad: &[u8],
        plaintext: &[u8],
    ) -> Vec<u8> {
        let mut seed = key.to_vec();
        seed.extend_from_slice(nonce);
        let mut body = plaintext.to_vec();
        let ks = self.keystream(&seed, body.len());
        xor_in_place(&mut body, &ks);
        let tag = self.mac(key, &aead_mac_input(nonce, aad, &body));
        body.extend_from_slice(&tag);
        body
    }

    fn aead_open(
        &self,
        key: &[u8; SYMMETRIC_KEY_LEN],
        nonce: &[u8; AEAD_NONCE_LEN],
        aad: &[u8],
        ciphertext: &[u8],
    ) -> Result<Vec<u8>, CryptoError> {
        if ciphertext.len() < TAG_LEN {
            return Err(CryptoError::DecryptFailure);
        }
        let (body, tag) = ciphertext.split_at(ciphertext.len() - TAG_LEN);
        if !ct_eq(&self.mac(key, &aead_mac_input(nonce, aad, body)), tag) {
            return Err(CryptoError::DecryptFailure);
        }
        let mut seed = key.to_vec();
        seed.extend_from_slice(nonce);
        let mut plain = body.to_vec();
        let ks = self.keystream(&seed, plain.len());
        xor_in_place(&mut plain, &ks);
        Ok(plain)
    }

    fn dh_keygen(&self, rng: &mut dyn RngCore) -> DhElement {
        let x = random_exponent(rng);
        DhElement::new(encode(mod_pow(GENERATOR, x)), Some(encode(x)))
    }

    fn dh_from_exponent(&self, exponent: &[u8]) -> Result<DhElement, CryptoError> {
        let x = decode_exponent(exponent)?;
        Ok(DhElement::new(
            encode(mod_pow(GENERATOR, x)),
            Some(exponent.to_vec()),
        ))
    }

    fn dh_validate(&self, value: &[u8]) -> Result<(), CryptoError> {
        decode_element(value).map(|_| ())
    }

    fn dh_shared(&self, own: &DhElement, peer: &[u8]) -> Result<Vec<u8>, CryptoError> {
        let x = decode_exponent(own.exponent().ok_or(CryptoError::InvalidKey)?)?;
        let y = decode_element(peer)?;
        Ok(encode(mod_pow(y, x)))
    }
}

fn aead_mac_input(nonce: &[u8], aad: &[u8], body: &[u8]) -> Vec<u8> {
    let mut input = Vec::with_capacity(nonce.len() + 8 + aad.len() + body.len());
    input.extend_from_slice(nonce);
    input.extend_from_slice(&(aad.len() as u64).to_be_bytes());
    input.extend_from_slice(aad);
    input.extend_from_slice(body);
    input
}
