//! One honest session per verification check, each with exactly that check
//! made to fail.

use std::sync::Arc;

use rand_chacha::ChaCha20Rng;
use vauth_core::attributes::SensorReading;
use vauth_core::base::BaseSession;
use vauth_core::certificates::{pad_compose, CertError, ValidityWindow};
use vauth_core::hardened::{HardenedConfig, HardenedMode, HardenedSession};
use vauth_core::session::{sequence_bytes, AbortKind, Phase, ProtocolError};
use vauth_core::suite::{Signature, SuiteId};
use vauth_core::wire::{Frame, WireMessage};
use vauth_core::{Identity, ProtocolMode};

use crate::config::{ScenarioConfig, Strategy};
use crate::world::World;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Check {
    CaSignature,
    Expiry,
    Attributes,
    Fingerprint,
    Padding,
    Sequence,
    ResponderSignature,
    Nonce,
}

impl Check {
    pub const ALL: [Check; 8] = [
        Check::CaSignature,
        Check::Expiry,
        Check::Attributes,
        Check::Fingerprint,
        Check::Padding,
        Check::Sequence,
        Check::ResponderSignature,
        Check::Nonce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::CaSignature => "bad CA signature",
            Check::Expiry => "expired certificate",
            Check::Attributes => "attribute mismatch",
            Check::Fingerprint => "fingerprint mismatch",
            Check::Padding => "padding violation",
            Check::Sequence => "sequence mismatch",
            Check::ResponderSignature => "signature mismatch",
            Check::Nonce => "nonce mismatch",
        }
    }

    pub fn expected(self) -> AbortKind {
        match self {
            Check::CaSignature | Check::Expiry => AbortKind::CertInvalid,
            Check::Attributes => AbortKind::AttributeMismatch,
            Check::Fingerprint => AbortKind::FingerprintMismatch,
            Check::Padding => AbortKind::PaddingInvalid,
            Check::Sequence => AbortKind::SequenceMismatch,
            Check::ResponderSignature => AbortKind::SignatureMismatch,
            Check::Nonce => AbortKind::NonceMismatch,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckOutcome {
    pub check: Check,
    /// What the targeted party reported, if it rejected anything.
    pub error: Option<ProtocolError>,
    pub victim_phase: Phase,
}

impl CheckOutcome {
    /// The named abort, with the certificate cause where one applies, and
    /// no session.
    pub fn passed(&self) -> bool {
        let Some(err) = &self.error else {
            return false;
        };
        let cause_ok = match (self.check, err) {
            (Check::CaSignature, ProtocolError::CertInvalid(c)) => *c == CertError::SignatureMismatch,
            (Check::Expiry, ProtocolError::CertInvalid(c)) => matches!(c, CertError::Expired { .. }),
            _ => true,
        };
        err.kind() == self.check.expected() && cause_ok && self.victim_phase != Phase::Established
    }
}

fn exact(id: &Identity) -> SensorReading {
    SensorReading::exact(&id.attributes)
}

fn m2_with_key_blob(world: &World, m2: &mut Frame, composition: &[u8], rng: &mut ChaCha20Rng) {
    let blob = world
        .cfg
        .suite
        .suite()
        .pk_encrypt(&world.s.certificate.public_key, composition, rng)
        .expect("S's certificate carries an encryption key");
    if let WireMessage::M2 { enc_key_blob, .. } = &mut m2.message {
        *enc_key_blob = blob;
    }
}

fn run_check(check: Check, suite: SuiteId, seed: u64) -> CheckOutcome {
    let mut cfg = ScenarioConfig::new(ProtocolMode::Base, Strategy::Passive, seed);
    cfg.suite = suite;
    let (mut world, mut rng) = World::build(&cfg).expect("default cast enrolls");
    let env = world.env.clone();
    let (s_id, r_id, a_id) = (world.s.clone(), world.r.clone(), world.a.clone());
    let mut s = BaseSession::initiator(s_id.clone(), env.clone());
    let mut r = BaseSession::responder(r_id.clone(), env.clone());

    // checks R makes on M1
    let on_m1 = |r: &mut BaseSession, m1: &Frame, seen: &Identity, rng: &mut ChaCha20Rng| {
        let err = r.responder_on_m1(m1, &exact(seen), rng).err();
        CheckOutcome {
            check,
            error: err,
            victim_phase: r.phase(),
        }
    };
    // checks S makes on M2
    let on_m2 = |s: &mut BaseSession, m2: &Frame| {
        let err = s.initiator_on_m2(m2, &exact(&r_id)).err();
        CheckOutcome {
            check,
            error: err,
            victim_phase: s.phase(),
        }
    };

    match check {
        Check::CaSignature => {
            let mut m1 = s.initiator_start().expect("fresh initiator");
            if let WireMessage::M1 { cert } = &mut m1.message {
                let mut sig = cert.ca_signature.as_bytes().to_vec();
                sig[0] ^= 1;
                cert.ca_signature = Signature::from_bytes(sig);
            }
            on_m1(&mut r, &m1, &s_id, &mut rng)
        }
        Check::Expiry => {
            let mut stale = (*s_id).clone();
            stale.certificate = world
                .ca
                .renew(&s_id.certificate, None, None, ValidityWindow::new(0, cfg.now - 1))
                .expect("same issuer");
            let mut s = BaseSession::initiator(Arc::new(stale), env);
            let m1 = s.initiator_start().expect("fresh initiator");
            on_m1(&mut r, &m1, &s_id, &mut rng)
        }
        Check::Attributes => {
            let m1 = s.initiator_start().expect("fresh initiator");
            on_m1(&mut r, &m1, &a_id, &mut rng)
        }
        Check::Fingerprint => {
            let m1 = s.initiator_start().expect("fresh initiator").restamped(a_id.radio);
            on_m1(&mut r, &m1, &s_id, &mut rng)
        }
        Check::Padding => {
            let m1 = s.initiator_start().expect("fresh initiator");
            let mut m2 = r.responder_on_m1(&m1, &exact(&s_id), &mut rng).expect("honest M1");
            let mut composition = pad_compose(&[1u8; 32], &sequence_bytes(s_id.certificate.sequence_number));
            composition[40] = 1;
            m2_with_key_blob(&world, &mut m2, &composition, &mut rng);
            on_m2(&mut s, &m2)
        }
        Check::Sequence => {
            // S' holds S's keys under a renewed certificate
            let m1 = s.initiator_start().expect("fresh initiator");
            let m2 = r.responder_on_m1(&m1, &exact(&s_id), &mut rng).expect("honest M1");
            let mut renewed = (*s_id).clone();
            let window = ValidityWindow::new(0, cfg.now + crate::world::VALIDITY_SPAN);
            renewed.certificate = world.ca.renew(&s_id.certificate, None, None, window).expect("same issuer");
            let mut s2 = BaseSession::initiator(Arc::new(renewed), env);
            s2.initiator_start().expect("fresh initiator");
            on_m2(&mut s2, &m2)
        }
        Check::ResponderSignature => {
            let m1 = s.initiator_start().expect("fresh initiator");
            let mut m2 = r.responder_on_m1(&m1, &exact(&s_id), &mut rng).expect("honest M1");
            let composition = pad_compose(&[0x42u8; 32], &sequence_bytes(s_id.certificate.sequence_number));
            m2_with_key_blob(&world, &mut m2, &composition, &mut rng);
            on_m2(&mut s, &m2)
        }
        Check::Nonce => {
            let hcfg = HardenedConfig {
                mode: HardenedMode::NonceAck,
            };
            let mut s = HardenedSession::initiator(s_id.clone(), env.clone(), hcfg);
            let mut r = HardenedSession::responder(r_id.clone(), env.clone(), hcfg);
            let m1 = s.h_initiator_start(&mut rng).expect("fresh initiator");
            let old_m2 = r.h_responder_on_m1(&m1, &exact(&s_id), &mut rng).expect("honest M1h");
            let mut s2 = HardenedSession::initiator(s_id, env, hcfg);
            s2.h_initiator_start(&mut rng).expect("fresh initiator");
            let err = s2.h_initiator_on_m2(&old_m2, &exact(&r_id)).err();
            CheckOutcome {
                check,
                error: err,
                victim_phase: s2.phase(),
            }
        }
    }
}

/// Runs every check once, each in its own freshly enrolled world.
pub fn enumerate_checks(suite: SuiteId, seed: u64) -> Vec<CheckOutcome> {
    Check::ALL.iter().map(|&c| run_check(c, suite, seed)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_names_its_abort() {
        for suite in SuiteId::ALL {
            for o in enumerate_checks(suite, 3) {
                assert!(o.passed(), "{suite} {}: {:?}", o.check.name(), o.error);
            }
        }
    }
}
