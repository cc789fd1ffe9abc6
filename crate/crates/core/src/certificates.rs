//! Monolithic certificates binding a vehicle's sense-able attributes to its
//! public keys under one CA signature.

use std::collections::BTreeMap;
use std::fmt;

use rand_core::RngCore;
use thiserror::Error;

use crate::attributes::{AttributeSet, EncodingError};
use crate::codec::{DecodeError, Reader, Writer};
use crate::suite::{CryptoSuite, Digest, KeyKind, Keypair, Signature, SuiteId};

/// Alignment of every field inside a padded composition.
pub const PAD_BLOCK: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("padded composition is invalid")]
pub struct PaddingInvalid;

fn padded_len(field_len: usize) -> usize {
    (2 + field_len).div_ceil(PAD_BLOCK) * PAD_BLOCK
}

/// Zero-padded, length-prefixed composition of any number of fields. Each
/// field is `len (2 octets) ‖ bytes ‖ zeros` up to the next 16-octet
/// boundary.
pub fn compose(fields: &[&[u8]]) -> Vec<u8> {
    let total = fields.iter().map(|f| padded_len(f.len())).sum();
    let mut out = Vec::with_capacity(total);
    for f in fields {
        let len = u16::try_from(f.len()).expect("composed field exceeds 65535 octets");
        let start = out.len();
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(f);
        out.resize(start + padded_len(f.len()), 0);
    }
    out
}

/// Checks a composition of exactly `count` fields and returns the parts.
pub fn validate_compose(composed: &[u8], count: usize) -> Result<Vec<Vec<u8>>, PaddingInvalid> {
    let mut parts = Vec::with_capacity(count);
    let mut rest = composed;
    for _ in 0..count {
        if rest.len() < 2 {
            return Err(PaddingInvalid);
        }
        let len = u16::from_be_bytes([rest[0], rest[1]]) as usize;
        let block = padded_len(len);
        if rest.len() < block {
            return Err(PaddingInvalid);
        }
        if rest[2 + len..block].iter().any(|&b| b != 0) {
            return Err(PaddingInvalid);
        }
        parts.push(rest[2..2 + len].to_vec());
        rest = &rest[block..];
    }
    if !rest.is_empty() {
        return Err(PaddingInvalid);
    }
    Ok(parts)
}

/// The "symmetric padded zero composition" of two fields.
pub fn pad_compose(a: &[u8], b: &[u8]) -> Vec<u8> {
    compose(&[a, b])
}

pub fn validate_pad_compose(composed: &[u8]) -> Result<(Vec<u8>, Vec<u8>), PaddingInvalid> {
    let mut parts = validate_compose(composed, 2)?;
    let b = parts.pop().expect("two parts");
    let a = parts.pop().expect("two parts");
    Ok((a, b))
}

pub fn compose3(a: &[u8], b: &[u8], c: &[u8]) -> Vec<u8> {
    compose(&[a, b, c])
}

/// The three components recovered from a composition.
pub type Parts3 = (Vec<u8>, Vec<u8>, Vec<u8>);

pub fn validate_compose3(composed: &[u8]) -> Result<Parts3, PaddingInvalid> {
    let mut parts = validate_compose(composed, 3)?.into_iter();
    let a = parts.next().expect("three parts");
    let b = parts.next().expect("three parts");
    let c = parts.next().expect("three parts");
    Ok((a, b, c))
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertError {
    #[error("unknown issuer `{0}`")]
    UnknownIssuer(String),
    #[error("CA signature does not verify")]
    SignatureMismatch,
    #[error("certificate not valid at t={now} (window {valid_from}..={valid_to})")]
    Expired {
        now: u64,
        valid_from: u64,
        valid_to: u64,
    },
    #[error("validity window {valid_from}..{valid_to} is empty")]
    InvalidWindow { valid_from: u64, valid_to: u64 },
    #[error("certificate was issued by `{actual}`, not `{expected}`")]
    IssuerMismatch { expected: String, actual: String },
    #[error(transparent)]
    Attributes(#[from] EncodingError),
    #[error("malformed certificate: {0}")]
    Malformed(#[from] DecodeError),
}

/// Seconds from the scenario epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ValidityWindow {
    pub valid_from: u64,
    pub valid_to: u64,
}

impl ValidityWindow {
    pub fn new(valid_from: u64, valid_to: u64) -> Self {
        ValidityWindow {
            valid_from,
            valid_to,
        }
    }
}

/// The public keys a certificate binds to the attributes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubjectKeys {
    pub encryption: Vec<u8>,
    pub signing: Vec<u8>,
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Certificate {
    pub attributes: AttributeSet,
    pub public_key: Vec<u8>,
    pub signing_public_key: Vec<u8>,
    pub sequence_number: u64,
    pub valid_from: u64,
    pub valid_to: u64,
    pub ca_id: String,
    pub ca_signature: Signature,
}

impl Certificate {
    /// Everything except the attributes and the signature, in field order.
    fn coupling_encoding(&self) -> Vec<u8> {
        Writer::new()
            .short(&self.public_key)
            .short(&self.signing_public_key)
            .u64(self.sequence_number)
            .u64(self.valid_from)
            .u64(self.valid_to)
            .short(self.ca_id.as_bytes())
            .finish()
    }

    /// `pad_compose(attributes, coupling)`: the octets the CA hashes and signs.
    pub fn signed_content(&self) -> Result<Vec<u8>, EncodingError> {
        Ok(pad_compose(
            &self.attributes.canonical_encode()?,
            &self.coupling_encoding(),
        ))
    }

    pub fn signed_digest(&self, suite: &dyn CryptoSuite) -> Result<Digest, EncodingError> {
        Ok(suite.hash(&self.signed_content()?))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let attrs = self
            .attributes
            .canonical_encode()
            .expect("certificate attributes are validated at issuance");
        Writer::new()
            .short(&attrs)
            .short(&self.public_key)
            .short(&self.signing_public_key)
            .u64(self.sequence_number)
            .u64(self.valid_from)
            .u64(self.valid_to)
            .short(self.ca_id.as_bytes())
            .short(self.ca_signature.as_bytes())
            .finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CertError> {
        let mut r = Reader::new(bytes);
        let attributes = AttributeSet::canonical_decode(r.short()?)?;
        let public_key = r.short()?.to_vec();
        let signing_public_key = r.short()?.to_vec();
        let sequence_number = r.u64()?;
        let valid_from = r.u64()?;
        let valid_to = r.u64()?;
        let ca_id = String::from_utf8(r.short()?.to_vec())
            .map_err(|_| DecodeError::Invalid("ca_id"))?;
        let ca_signature = Signature::from_bytes(r.short()?.to_vec());
        r.finish()?;
        Ok(Certificate {
            attributes,
            public_key,
            signing_public_key,
            sequence_number,
            valid_from,
            valid_to,
            ca_id,
            ca_signature,
        })
    }
}

impl fmt::Debug for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Certificate")
            .field("license", &self.attributes.license_number)
            .field("seq", &self.sequence_number)
            .field("ca_id", &self.ca_id)
            .finish_non_exhaustive()
    }
}

/// Human-readable dump for logs.
impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = &self.attributes;
        writeln!(f, "certificate #{} issued by {}", self.sequence_number, self.ca_id)?;
        writeln!(f, "  license_number:          {}", a.license_number)?;
        writeln!(f, "  brand:                   {}", a.brand)?;
        writeln!(f, "  color:                   {}", a.color)?;
        writeln!(f, "  texture_marks:           {}", a.texture_marks.join(","))?;
        writeln!(f, "  transceiver_fingerprint: {}", a.transceiver_fingerprint)?;
        writeln!(f, "  public_key:              {}", hex::encode(&self.public_key))?;
        writeln!(f, "  signing_public_key:      {}", hex::encode(&self.signing_public_key))?;
        writeln!(f, "  valid:                   {}..={}", self.valid_from, self.valid_to)?;
        write!(f, "  ca_signature:            {}", hex::encode(self.ca_signature.as_bytes()))
    }
}

/// CA public keys a vehicle ships with.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrustStore {
    anchors: BTreeMap<String, Vec<u8>>,
}

impl TrustStore {
    pub fn new() -> Self {
        TrustStore::default()
    }

    pub fn add(&mut self, ca_id: impl Into<String>, public_key: Vec<u8>) {
        self.anchors.insert(ca_id.into(), public_key);
    }

    pub fn get(&self, ca_id: &str) -> Option<&[u8]> {
        self.anchors.get(ca_id).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[u8])> {
        self.anchors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// Valid iff the issuer is trusted, the signature verifies, and
/// `valid_from ≤ now ≤ valid_to`.
pub fn verify_certificate(
    suite: &dyn CryptoSuite,
    trust_store: &TrustStore,
    cert: &Certificate,
    now: u64,
) -> Result<(), CertError> {
    let ca_key = trust_store
        .get(&cert.ca_id)
        .ok_or_else(|| CertError::UnknownIssuer(cert.ca_id.clone()))?;
    let digest = cert
        .signed_digest(suite)
        .map_err(|_| CertError::SignatureMismatch)?;
    if !suite.verify(ca_key, &digest, cert.ca_signature.as_bytes()) {
        return Err(CertError::SignatureMismatch);
    }
    if now < cert.valid_from || now > cert.valid_to {
        return Err(CertError::Expired {
            now,
            valid_from: cert.valid_from,
            valid_to: cert.valid_to,
        });
    }
    Ok(())
}

#[derive(Debug)]
pub struct CertificateAuthority {
    ca_id: String,
    suite: SuiteId,
    keypair: Keypair,
    next_sequence: u64,
}

impl CertificateAuthority {
    pub fn new(ca_id: impl Into<String>, suite: SuiteId, rng: &mut dyn RngCore) -> Self {
        let keypair = suite.suite().generate_keypair(KeyKind::Signing, rng);
        CertificateAuthority::with_keypair(ca_id, suite, keypair)
    }

    pub fn with_keypair(ca_id: impl Into<String>, suite: SuiteId, keypair: Keypair) -> Self {
        CertificateAuthority {
            ca_id: ca_id.into(),
            suite,
            keypair,
            next_sequence: 1,
        }
    }

    pub fn ca_id(&self) -> &str {
        &self.ca_id
    }

    pub fn public_key(&self) -> &[u8] {
        self.keypair.public()
    }

    /// Secret signing key. Only the adversary toolkit's negative controls
    /// and corruption tests should need this.
    pub fn keypair(&self) -> &Keypair {
        &self.keypair
    }

    pub fn trust_store(&self) -> TrustStore {
        let mut store = TrustStore::new();
        store.add(self.ca_id.clone(), self.public_key().to_vec());
        store
    }

    pub fn issue(
        &mut self,
        attributes: AttributeSet,
        keys: &SubjectKeys,
        window: ValidityWindow,
    ) -> Result<Certificate, CertError> {
        if window.valid_from >= window.valid_to {
            return Err(CertError::InvalidWindow {
                valid_from: window.valid_from,
                valid_to: window.valid_to,
            });
        }
        attributes.validate()?;
        let mut cert = Certificate {
            attributes,
            public_key: keys.encryption.clone(),
            signing_public_key: keys.signing.clone(),
            sequence_number: self.next_sequence,
            valid_from: window.valid_from,
            valid_to: window.valid_to,
            ca_id: self.ca_id.clone(),
            ca_signature: Signature::from_bytes(Vec::new()),
        };
        let suite = self.suite.suite();
        let digest = cert.signed_digest(suite)?;
        cert.ca_signature = suite
            .sign(self.keypair.secret(), &digest)
            .expect("CA keypair is a signing key");
        self.next_sequence += 1;
        Ok(cert)
    }

    /// Re-issues `old` with a fresh sequence number and window. Attributes
    /// and keys carry over unless replacements are given.
    pub fn renew(
        &mut self,
        old: &Certificate,
        new_attributes: Option<AttributeSet>,
        new_keys: Option<SubjectKeys>,
        window: ValidityWindow,
    ) -> Result<Certificate, CertError> {
        if old.ca_id != self.ca_id {
            return Err(CertError::IssuerMismatch {
                expected: self.ca_id.clone(),
                actual: old.ca_id.clone(),
            });
        }
        let keys = new_keys.unwrap_or_else(|| SubjectKeys {
            encryption: old.public_key.clone(),
            signing: old.signing_public_key.clone(),
        });
        self.issue(
            new_attributes.unwrap_or_else(|| old.attributes.clone()),
            &keys,
            window,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::{Color, Fingerprint};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn attrs() -> AttributeSet {
        AttributeSet {
            license_number: "WR12345".into(),
            brand: "Fiat".into(),
            color: Color::White,
            texture_marks: vec!["tow-hitch".into()],
            transceiver_fingerprint: Fingerprint([9; 8]),
        }
    }

    fn setup(suite: SuiteId) -> (CertificateAuthority, SubjectKeys, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let ca = CertificateAuthority::new("pl-transport", suite, &mut rng);
        let s = suite.suite();
        let keys = SubjectKeys {
            encryption: s.generate_keypair(KeyKind::Encryption, &mut rng).public().to_vec(),
            signing: s.generate_keypair(KeyKind::Signing, &mut rng).public().to_vec(),
        };
        (ca, keys, rng)
    }

    #[test]
    fn compose_roundtrip_small_lengths() {
        for la in 0usize..32 {
            for lb in 0usize..32 {
                let a: Vec<u8> = (0..la as u8).map(|i| i.wrapping_mul(7) | 1).collect();
                let b: Vec<u8> = (0..lb as u8).map(|i| i ^ 0x5a).collect();
                let c = pad_compose(&a, &b);
                let predicted = (2 + la).div_ceil(16) * 16 + (2 + lb).div_ceil(16) * 16;
                assert_eq!(c.len(), predicted);
                assert_eq!(c.len() % 16, 0);
                assert_eq!(validate_pad_compose(&c).unwrap(), (a, b));
            }
        }
    }

    #[test]
    fn nonzero_padding_rejected() {
        let c = pad_compose(b"key", b"seq");
        // first field occupies octets 0..16 with padding from octet 5
        for i in 5..16 {
            let mut bad = c.clone();
            bad[i] = 0x01;
            assert_eq!(validate_pad_compose(&bad), Err(PaddingInvalid), "octet {i}");
        }
    }

    #[test]
    fn length_overrun_rejected() {
        let mut c = pad_compose(b"key", b"seq");
        c[1] = 200;
        assert_eq!(validate_pad_compose(&c), Err(PaddingInvalid));
        let c = pad_compose(b"key", b"seq");
        assert_eq!(validate_pad_compose(&c[..c.len() - 1]), Err(PaddingInvalid));
        assert!(validate_compose(&c, 3).is_err());
        assert_eq!(validate_compose3(&compose3(b"a", b"", b"c")).unwrap().1, b"");
    }

    #[test]
    fn issue_then_verify() {
        for suite in SuiteId::ALL {
            let (mut ca, keys, _) = setup(suite);
            let cert = ca.issue(attrs(), &keys, ValidityWindow::new(0, 100)).unwrap();
            verify_certificate(suite.suite(), &ca.trust_store(), &cert, 50).unwrap();
        }
    }

    #[test]
    fn sequence_numbers_increase() {
        let (mut ca, keys, _) = setup(SuiteId::Standard);
        let a = ca.issue(attrs(), &keys, ValidityWindow::new(0, 100)).unwrap();
        let b = ca.issue(attrs(), &keys, ValidityWindow::new(0, 100)).unwrap();
        assert_eq!(b.sequence_number, a.sequence_number + 1);
    }

    #[test]
    fn reversed_window_rejected() {
        let (mut ca, keys, _) = setup(SuiteId::Standard);
        assert!(matches!(
            ca.issue(attrs(), &keys, ValidityWindow::new(100, 10)),
            Err(CertError::InvalidWindow { .. })
        ));
        assert!(ca.issue(attrs(), &keys, ValidityWindow::new(10, 10)).is_err());
    }

    #[test]
    fn expiry_and_unknown_issuer() {
        let (mut ca, keys, mut rng) = setup(SuiteId::Standard);
        let cert = ca.issue(attrs(), &keys, ValidityWindow::new(10, 100)).unwrap();
        let store = ca.trust_store();
        let s = SuiteId::Standard.suite();
        assert!(matches!(
            verify_certificate(s, &store, &cert, 101),
            Err(CertError::Expired { .. })
        ));
        assert!(matches!(
            verify_certificate(s, &store, &cert, 9),
            Err(CertError::Expired { .. })
        ));
        verify_certificate(s, &store, &cert, 100).unwrap();
        let other = CertificateAuthority::new("other", SuiteId::Standard, &mut rng);
        assert_eq!(
            verify_certificate(s, &other.trust_store(), &cert, 50),
            Err(CertError::UnknownIssuer("pl-transport".into()))
        );
    }

    #[test]
    fn every_attribute_byte_flip_breaks_signature() {
        let (mut ca, keys, _) = setup(SuiteId::Standard);
        let cert = ca.issue(attrs(), &keys, ValidityWindow::new(0, 100)).unwrap();
        let store = ca.trust_store();
        let bytes = cert.to_bytes();
        let attr_len = cert.attributes.canonical_encode().unwrap().len();
        for i in 2..2 + attr_len {
            for flip in [0x01u8, 0x80] {
                let mut b = bytes.clone();
                b[i] ^= flip;
                // a flip that breaks the attribute encoding is also a rejection
                if let Ok(forged) = Certificate::from_bytes(&b) {
                    assert_eq!(
                        verify_certificate(SuiteId::Standard.suite(), &store, &forged, 50),
                        Err(CertError::SignatureMismatch),
                        "octet {i}"
                    );
                }
            }
        }
    }

    #[test]
    fn serialization_roundtrips() {
        let (mut ca, keys, _) = setup(SuiteId::Toy);
        let cert = ca.issue(attrs(), &keys, ValidityWindow::new(0, 100)).unwrap();
        let bytes = cert.to_bytes();
        assert_eq!(Certificate::from_bytes(&bytes).unwrap(), cert);
        assert_eq!(Certificate::from_bytes(&bytes).unwrap().to_bytes(), bytes);
        assert!(Certificate::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(cert.to_string().contains("WR12345"));
    }

    #[test]
    fn renewal() {
        let (mut ca, keys, _) = setup(SuiteId::Standard);
        let s = SuiteId::Standard.suite();
        let store = ca.trust_store();
        let old = ca.issue(attrs(), &keys, ValidityWindow::new(0, 100)).unwrap();
        let same = ca.renew(&old, None, None, ValidityWindow::new(50, 200)).unwrap();
        assert_eq!(same.attributes, old.attributes);
        assert_eq!(same.public_key, old.public_key);
        assert_ne!(same.sequence_number, old.sequence_number);
        let mut repainted = attrs();
        repainted.color = Color::Green;
        let new = ca
            .renew(&old, Some(repainted), None, ValidityWindow::new(50, 200))
            .unwrap();
        verify_certificate(s, &store, &new, 150).unwrap();
        // no revocation: the old certificate stays valid until it expires
        verify_certificate(s, &store, &old, 99).unwrap();
        assert!(verify_certificate(s, &store, &old, 150).is_err());
    }

    #[test]
    fn key_swap_between_certificates_rejected() {
        let (mut ca, keys, mut rng) = setup(SuiteId::Standard);
        let s = SuiteId::Standard.suite();
        let a = ca.issue(attrs(), &keys, ValidityWindow::new(0, 100)).unwrap();
        let other_keys = SubjectKeys {
            encryption: s.generate_keypair(KeyKind::Encryption, &mut rng).public().to_vec(),
            signing: s.generate_keypair(KeyKind::Signing, &mut rng).public().to_vec(),
        };
        let b = ca
            .issue(AttributeSet::random(&mut rng), &other_keys, ValidityWindow::new(0, 100))
            .unwrap();
        let mut swapped = a.clone();
        swapped.public_key = b.public_key.clone();
        assert_eq!(
            verify_certificate(s, &ca.trust_store(), &swapped, 1),
            Err(CertError::SignatureMismatch)
        );
    }
}
