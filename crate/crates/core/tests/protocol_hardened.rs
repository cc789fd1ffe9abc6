mod common;

use vauth_core::attributes::SensorReading;
use vauth_core::certificates::validate_compose3;
use vauth_core::hardened::{
    ack_digest, fs_session_key, HardenedConfig, HardenedMode, HardenedSession, NONCE_LEN,
};
use vauth_core::session::{Phase, ProtocolError};
use vauth_core::suite::SuiteId;
use vauth_core::wire::{Frame, WireMessage};
use vauth_core::Identity;

use common::Pair;

const MODES: [HardenedMode; 2] = [HardenedMode::NonceAck, HardenedMode::FsDh];

fn sessions(p: &Pair, mode: HardenedMode) -> (HardenedSession, HardenedSession) {
    let cfg = HardenedConfig { mode };
    (
        HardenedSession::initiator(p.s.clone(), p.env.clone(), cfg),
        HardenedSession::responder(p.r.clone(), p.env.clone(), cfg),
    )
}

fn exact(id: &Identity) -> SensorReading {
    SensorReading::exact(&id.attributes)
}

/// Runs M1h → M2h → Ack and returns the three frames.
fn run(p: &mut Pair, s: &mut HardenedSession, r: &mut HardenedSession) -> [Frame; 3] {
    let m1 = s.h_initiator_start(&mut p.rng).unwrap();
    let m2 = r.h_responder_on_m1(&m1, &exact(&p.s), &mut p.rng).unwrap();
    assert_eq!(r.phase(), Phase::AwaitingAck);
    assert_eq!(r.session_key(), None);
    let ack = s.h_initiator_on_m2(&m2, &exact(&p.r)).unwrap();
    r.h_responder_on_ack(&ack).unwrap();
    [m1, m2, ack]
}

#[test]
fn honest_runs_agree() {
    for suite in SuiteId::ALL {
        for mode in MODES {
            let mut p = Pair::new(suite, 30);
            let (mut s, mut r) = sessions(&p, mode);
            let [_, _, ack] = run(&mut p, &mut s, &mut r);
            assert!(matches!(ack.message, WireMessage::Ack { .. }));
            assert_eq!(s.phase(), Phase::Established);
            assert_eq!(r.phase(), Phase::Established);
            assert_eq!(s.session_key(), r.session_key());
            assert!(!s.holds_exponent());
            assert_eq!(s.nonce(), r.nonce());
        }
    }
}

#[test]
fn nonces_are_fresh_and_well_formed() {
    let mut p = Pair::new(SuiteId::Toy, 31);
    for mode in MODES {
        let (mut a, _) = sessions(&p, mode);
        let (mut b, _) = sessions(&p, mode);
        a.h_initiator_start(&mut p.rng).unwrap();
        b.h_initiator_start(&mut p.rng).unwrap();
        assert_ne!(a.nonce(), b.nonce());
        match mode {
            HardenedMode::NonceAck => assert_eq!(a.nonce().unwrap().len(), NONCE_LEN),
            HardenedMode::FsDh => {
                SuiteId::Toy.suite().dh_validate(a.nonce().unwrap()).unwrap();
                assert!(a.holds_exponent());
            }
        }
    }
}

#[test]
fn hardened_frame_requires_nonce_field() {
    let mut p = Pair::new(SuiteId::Toy, 32);
    let (mut s, _) = sessions(&p, HardenedMode::NonceAck);
    let m1h = s.h_initiator_start(&mut p.rng).unwrap();
    let WireMessage::M1h { cert, .. } = &m1h.message else { panic!() };
    // an M1 body under the M1h tag lacks the nonce field
    let mut bytes = WireMessage::M1 { cert: cert.clone() }.encode();
    bytes[0] = m1h.tag().code();
    assert!(WireMessage::decode(&bytes).is_err());

    // and a plain M1 is not accepted by a hardened responder
    let (_, mut r) = sessions(&p, HardenedMode::NonceAck);
    let m1 = Frame::new(p.s.radio, WireMessage::M1 { cert: cert.clone() });
    assert_eq!(
        r.h_responder_on_m1(&m1, &exact(&p.s), &mut p.rng).unwrap_err(),
        ProtocolError::UnexpectedMessage(vauth_core::wire::Tag::M1)
    );
}

#[test]
fn echoed_nonce_is_what_was_sent() {
    let mut p = Pair::new(SuiteId::Standard, 33);
    let (mut s, mut r) = sessions(&p, HardenedMode::NonceAck);
    let m1 = s.h_initiator_start(&mut p.rng).unwrap();
    let m2 = r.h_responder_on_m1(&m1, &exact(&p.s), &mut p.rng).unwrap();
    let WireMessage::M2h { enc_key_blob, .. } = &m2.message else { panic!() };
    let payload = SuiteId::Standard
        .suite()
        .pk_decrypt(p.s.encryption.secret(), enc_key_blob)
        .unwrap();
    let (_, _, echoed) = validate_compose3(&payload).unwrap();
    assert_eq!(Some(echoed.as_slice()), s.nonce());
}

#[test]
fn fs_key_matches_independent_derivation() {
    let mut p = Pair::new(SuiteId::Toy, 34);
    let (mut s, mut r) = sessions(&p, HardenedMode::FsDh);
    let [m1, m2, _] = run(&mut p, &mut s, &mut r);
    let suite = SuiteId::Toy.suite();
    let WireMessage::M1h { nonce: ga, .. } = &m1.message else { panic!() };
    let WireMessage::M2h { enc_key_blob, .. } = &m2.message else { panic!() };
    let payload = suite.pk_decrypt(p.s.encryption.secret(), enc_key_blob).unwrap();
    let (gb, _, _) = validate_compose3(&payload).unwrap();
    // brute-force the responder's exponent in the small group
    let gb_val = u16::from_be_bytes([gb[0], gb[1]]) as u32;
    let beta = (1..1018u32)
        .find(|&e| vauth_core::suite::toy::mod_pow(2, e) == gb_val)
        .unwrap();
    let ga_val = u16::from_be_bytes([ga[0], ga[1]]) as u32;
    let shared = (vauth_core::suite::toy::mod_pow(ga_val, beta) as u16).to_be_bytes();
    let expected = fs_session_key(suite, &shared, ga, &gb);
    assert_eq!(s.session_key(), Some(expected));
    let mut input = shared.to_vec();
    input.extend_from_slice(ga);
    input.extend_from_slice(&gb);
    assert_eq!(expected.0, suite.kdf(b"vanet-fs-v1", &input));
}

#[test]
fn replayed_m2h_into_fresh_session_is_nonce_mismatch() {
    for mode in MODES {
        let mut p = Pair::new(SuiteId::Standard, 35);
        let (mut s, mut r) = sessions(&p, mode);
        let [_, old_m2, _] = run(&mut p, &mut s, &mut r);
        let (mut s2, _) = sessions(&p, mode);
        s2.h_initiator_start(&mut p.rng).unwrap();
        assert_eq!(
            s2.h_initiator_on_m2(&old_m2, &exact(&p.r)).unwrap_err(),
            ProtocolError::NonceMismatch
        );
        assert_eq!(s2.phase(), Phase::Aborted);
    }
}

#[test]
fn missing_or_garbled_ack_keeps_responder_unestablished() {
    let mut p = Pair::new(SuiteId::Toy, 36);
    let (mut s, mut r) = sessions(&p, HardenedMode::NonceAck);
    let m1 = s.h_initiator_start(&mut p.rng).unwrap();
    let m2 = r.h_responder_on_m1(&m1, &exact(&p.s), &mut p.rng).unwrap();
    // no Ack yet: R cannot send data
    assert_eq!(
        r.seal(b"unwanted").unwrap_err(),
        ProtocolError::ProtocolState(Phase::AwaitingAck)
    );
    let mut ack = s.h_initiator_on_m2(&m2, &exact(&p.r)).unwrap();
    if let WireMessage::Ack { ciphertext } = &mut ack.message {
        ciphertext[12] ^= 0x80;
    }
    assert_eq!(r.h_responder_on_ack(&ack).unwrap_err(), ProtocolError::IntegrityFailure);
    assert_eq!(r.phase(), Phase::Aborted);
    assert_eq!(r.session_key(), None);
}

#[test]
fn zero_length_ack_fails_integrity() {
    let mut p = Pair::new(SuiteId::Standard, 37);
    let (mut s, mut r) = sessions(&p, HardenedMode::NonceAck);
    let m1 = s.h_initiator_start(&mut p.rng).unwrap();
    r.h_responder_on_m1(&m1, &exact(&p.s), &mut p.rng).unwrap();
    let empty = Frame::new(p.s.radio, WireMessage::Ack { ciphertext: Vec::new() });
    assert_eq!(r.h_responder_on_ack(&empty).unwrap_err(), ProtocolError::IntegrityFailure);
}

#[test]
fn old_ack_replayed_into_new_session_fails() {
    let mut p = Pair::new(SuiteId::Standard, 38);
    let (mut s, mut r) = sessions(&p, HardenedMode::NonceAck);
    let [_, _, old_ack] = run(&mut p, &mut s, &mut r);
    let (mut s2, mut r2) = sessions(&p, HardenedMode::NonceAck);
    let m1 = s2.h_initiator_start(&mut p.rng).unwrap();
    r2.h_responder_on_m1(&m1, &exact(&p.s), &mut p.rng).unwrap();
    assert_eq!(r2.h_responder_on_ack(&old_ack).unwrap_err(), ProtocolError::IntegrityFailure);
    assert_ne!(r2.phase(), Phase::Established);
}

/// An Ack over a different M2h under the right key is a digest mismatch.
#[test]
fn ack_over_other_message_is_digest_mismatch() {
    let mut p = Pair::new(SuiteId::Toy, 39);
    let (mut s, mut r) = sessions(&p, HardenedMode::NonceAck);
    let m1 = s.h_initiator_start(&mut p.rng).unwrap();
    let m2 = r.h_responder_on_m1(&m1, &exact(&p.s), &mut p.rng).unwrap();
    s.h_initiator_on_m2(&m2, &exact(&p.r)).unwrap();
    let suite = SuiteId::Toy.suite();
    let mut other = m2.message.clone();
    if let WireMessage::M2h { enc_sig_blob, .. } = &mut other {
        enc_sig_blob.push(0);
    }
    assert_ne!(ack_digest(suite, &other), ack_digest(suite, &m2.message));
    let wrong = s.core_mut().seal_ack(ack_digest(suite, &other).as_bytes()).unwrap();
    assert_eq!(r.h_responder_on_ack(&wrong).unwrap_err(), ProtocolError::DigestMismatch);
}

#[test]
fn invalid_dh_nonce_is_rejected() {
    let mut p = Pair::new(SuiteId::Toy, 40);
    let (mut s, mut r) = sessions(&p, HardenedMode::FsDh);
    let mut m1 = s.h_initiator_start(&mut p.rng).unwrap();
    if let WireMessage::M1h { nonce, .. } = &mut m1.message {
        *nonce = 1u16.to_be_bytes().to_vec();
    }
    assert_eq!(
        r.h_responder_on_m1(&m1, &exact(&p.s), &mut p.rng).unwrap_err(),
        ProtocolError::InvalidGroupElement
    );
}

#[test]
fn hardened_round_structure() {
    for mode in [vauth_core::ProtocolMode::NonceAck, vauth_core::ProtocolMode::FsDh] {
        let mut p = Pair::new(SuiteId::Toy, 41);
        let (mut s, mut r) = p.parties(mode);
        let frames = common::handshake(s.as_mut(), r.as_mut(), &mut p.rng);
        let tags: Vec<_> = frames.iter().map(|f| f.tag().name()).collect();
        assert_eq!(tags, ["M1H", "M2H", "ACK"]);
        assert_eq!(s.session_key(), r.session_key());
        assert!(s.session_key().is_some());
    }
}
