//! Certificate forgery toolkit: splice, substitute, re-sign and bit-flip
//! attacks against a batch of freshly issued certificates.

use std::collections::{BTreeMap, HashSet};

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use vauth_core::attributes::{AttributeSet, Color, Fingerprint};
use vauth_core::certificates::{verify_certificate, Certificate, CertificateAuthority, SubjectKeys, TrustStore, ValidityWindow};
use vauth_core::suite::{KeyKind, SuiteId};

pub const ROGUE_CA: &str = "rogue-ca";
pub const NOW: u64 = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    SpliceKeys,
    SpliceAttributes,
    SignatureTransplant,
    SubstituteColor,
    SubstituteLicense,
    SubstituteFingerprint,
    SubstituteSequence,
    SubstituteValidity,
    SubstituteIssuer,
    ResignSameIssuer,
    ResignRogueIssuer,
    ByteFlip,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ForgeryReport {
    pub issued: usize,
    pub attempts: BTreeMap<Technique, usize>,
    /// Forged certificates that verified and bind something never issued.
    pub accepted: Vec<(Technique, usize)>,
}

impl ForgeryReport {
    pub fn total_attempts(&self) -> usize {
        self.attempts.values().sum()
    }
}

fn other_color(c: Color) -> Color {
    Color::ALL.into_iter().find(|&x| x != c).expect("several colors")
}

/// A certificate that verifies now yet signs content the CA never issued.
pub fn is_forgery(suite: SuiteId, store: &TrustStore, issued: &HashSet<Vec<u8>>, cert: &Certificate) -> bool {
    let Ok(content) = cert.signed_content() else {
        return false;
    };
    verify_certificate(suite.suite(), store, cert, NOW).is_ok() && !issued.contains(&content)
}

/// Issues `count` certificates under one CA, then tries every technique on
/// each of them.
pub fn run_forgery(suite: SuiteId, count: usize, seed: u64) -> ForgeryReport {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let s = suite.suite();
    let mut ca = CertificateAuthority::new("ca-forgery", suite, &mut rng);
    let store = ca.trust_store();
    let window = ValidityWindow::new(0, NOW * 10);
    let certs: Vec<Certificate> = (0..count)
        .map(|_| {
            let keys = SubjectKeys {
                encryption: s.generate_keypair(KeyKind::Encryption, &mut rng).public().to_vec(),
                signing: s.generate_keypair(KeyKind::Signing, &mut rng).public().to_vec(),
            };
            ca.issue(AttributeSet::random(&mut rng), &keys, window).expect("valid window")
        })
        .collect();
    let issued: HashSet<Vec<u8>> = certs
        .iter()
        .map(|c| c.signed_content().expect("issued certificates encode"))
        .collect();
    let rogue = s.generate_keypair(KeyKind::Signing, &mut rng);
    let resign = |c: &mut Certificate| {
        let digest = c.signed_digest(s).expect("forged attributes encode");
        c.ca_signature = s.sign(rogue.secret(), &digest).expect("signing key");
    };

    let mut report = ForgeryReport {
        issued: count,
        ..ForgeryReport::default()
    };
    let attempt = |report: &mut ForgeryReport, technique: Technique, i: usize, forged: Option<Certificate>| {
        *report.attempts.entry(technique).or_default() += 1;
        if forged.is_some_and(|c| is_forgery(suite, &store, &issued, &c)) {
            report.accepted.push((technique, i));
        }
    };

    for (i, cert) in certs.iter().enumerate() {
        let other = &certs[(i + 1) % count];

        let mut c = cert.clone();
        c.public_key = other.public_key.clone();
        c.signing_public_key = other.signing_public_key.clone();
        attempt(&mut report, Technique::SpliceKeys, i, Some(c));

        let mut c = cert.clone();
        c.attributes = other.attributes.clone();
        attempt(&mut report, Technique::SpliceAttributes, i, Some(c));

        let mut c = cert.clone();
        c.ca_signature = other.ca_signature.clone();
        attempt(&mut report, Technique::SignatureTransplant, i, Some(c));

        let mut c = cert.clone();
        c.attributes.color = other_color(c.attributes.color);
        attempt(&mut report, Technique::SubstituteColor, i, Some(c));

        let mut c = cert.clone();
        c.attributes.license_number = other.attributes.license_number.clone();
        attempt(&mut report, Technique::SubstituteLicense, i, Some(c));

        let mut c = cert.clone();
        c.attributes.transceiver_fingerprint = Fingerprint::random(&mut rng);
        attempt(&mut report, Technique::SubstituteFingerprint, i, Some(c));

        let mut c = cert.clone();
        c.sequence_number += 1;
        attempt(&mut report, Technique::SubstituteSequence, i, Some(c));

        let mut c = cert.clone();
        c.valid_to += NOW;
        attempt(&mut report, Technique::SubstituteValidity, i, Some(c));

        let mut c = cert.clone();
        c.ca_id = ROGUE_CA.into();
        attempt(&mut report, Technique::SubstituteIssuer, i, Some(c));

        let mut c = cert.clone();
        c.attributes.color = other_color(c.attributes.color);
        resign(&mut c);
        attempt(&mut report, Technique::ResignSameIssuer, i, Some(c));

        let mut c = cert.clone();
        c.ca_id = ROGUE_CA.into();
        resign(&mut c);
        attempt(&mut report, Technique::ResignRogueIssuer, i, Some(c));

        let mut bytes = cert.to_bytes();
        let pos = rng.next_u32() as usize % bytes.len();
        bytes[pos] ^= 1 << (rng.next_u32() % 8);
        attempt(&mut report, Technique::ByteFlip, i, Certificate::from_bytes(&bytes).ok());
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_batch_yields_nothing() {
        let r = run_forgery(SuiteId::Standard, 20, 5);
        assert_eq!(r.issued, 20);
        assert_eq!(r.total_attempts(), 20 * 12);
        assert!(r.accepted.is_empty(), "{:?}", r.accepted);
    }
}
