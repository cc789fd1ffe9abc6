use vauth_core::attributes::{AttributeField, NoiseProfile};
use vauth_core::session::{AbortKind, Phase};
use vauth_core::suite::SuiteId;
use vauth_core::ProtocolMode;
use vauth_sim::forgery::run_forgery;
use vauth_sim::scenario::LOOKALIKE_SUFFIX;
use vauth_sim::{impersonate_corrupted, run_scenario, Criterion, ScenarioConfig, Strategy};

const GATED: [ProtocolMode; 6] = [
    ProtocolMode::Base,
    ProtocolMode::NonceAck,
    ProtocolMode::FsDh,
    ProtocolMode::IsoKe,
    ProtocolMode::Sigma,
    ProtocolMode::Tls,
];

fn run(mode: ProtocolMode, strategy: Strategy, seed: u64) -> vauth_sim::ScenarioResult {
    run_scenario(&ScenarioConfig::new(mode, strategy, seed)).unwrap()
}

#[test]
fn passive_listener_learns_nothing() {
    for mode in ProtocolMode::ALL {
        let r = run(mode, Strategy::Passive, 11);
        assert!(!r.adversary_success, "{mode}");
        assert!(!r.closure_contains_session_key && !r.closure_contains_plaintext, "{mode}");
        assert!(r.honest().all(|p| p.established()), "{mode}");
    }
}

#[test]
fn relay_breaks_only_the_ungated_baseline() {
    assert!(run(ProtocolMode::PlainPki, Strategy::MitmRelay, 12).adversary_success);
    for mode in GATED {
        let r = run(mode, Strategy::MitmRelay, 12);
        assert!(!r.adversary_success, "{mode}");
        assert_eq!(r.abort_reasons(), ["S:AttributeMismatch", "R:AttributeMismatch"], "{mode}");
    }
}

#[test]
fn responder_side_replay() {
    for mode in [ProtocolMode::PlainPki, ProtocolMode::Base] {
        let r = run(mode, Strategy::RepetitionV1, 13);
        assert!(r.adversary_success, "{mode}");
        assert_eq!(r.criterion, Criterion::ResponderAcceptedReplay);
    }
    let expect = [
        (ProtocolMode::NonceAck, "IntegrityFailure"),
        (ProtocolMode::FsDh, "IntegrityFailure"),
        (ProtocolMode::IsoKe, "SignatureMismatch"),
        (ProtocolMode::Sigma, "DecryptFailure"),
        (ProtocolMode::Tls, "FinishMismatch"),
    ];
    for (mode, kind) in expect {
        let r = run(mode, Strategy::RepetitionV1, 13);
        assert!(!r.adversary_success, "{mode}");
        assert!(r.abort_reasons().iter().any(|a| a.ends_with(kind)), "{mode}: {:?}", r.abort_reasons());
    }
}

#[test]
fn initiator_side_replay() {
    for mode in [ProtocolMode::PlainPki, ProtocolMode::Base] {
        let r = run(mode, Strategy::RepetitionV2, 14);
        assert!(r.adversary_success, "{mode}");
        assert_eq!(r.criterion, Criterion::InitiatorOpenedReplay);
    }
    for mode in [ProtocolMode::NonceAck, ProtocolMode::FsDh] {
        let r = run(mode, Strategy::RepetitionV2, 14);
        assert!(!r.adversary_success, "{mode}");
        assert!(r.abort_reasons().contains(&"S:NonceMismatch".to_string()), "{mode}");
    }
}

#[test]
fn lookalike_responder_is_recorded_as_such() {
    let mut cfg = ScenarioConfig::new(ProtocolMode::Base, Strategy::RepetitionV2, 15);
    cfg.flags.similar_attributes = true;
    let r = run_scenario(&cfg).unwrap();
    assert!(r.adversary_success);
    let facing = format!("R{LOOKALIKE_SUFFIX}");
    assert!(r.transcript.records.iter().any(|rec| rec.to == facing));
}

#[test]
fn renewal_defeats_base_replay() {
    let mut cfg = ScenarioConfig::new(ProtocolMode::Base, Strategy::RepetitionV2, 16);
    cfg.flags.renew_before_replay = true;
    let r = run_scenario(&cfg).unwrap();
    assert!(!r.adversary_success);
    assert!(r.abort_reasons().contains(&"S:SequenceMismatch".to_string()), "{:?}", r.abort_reasons());
}

#[test]
fn later_corruption() {
    for (mode, broken) in [
        (ProtocolMode::PlainPki, true),
        (ProtocolMode::Base, true),
        (ProtocolMode::NonceAck, true),
        (ProtocolMode::FsDh, false),
        (ProtocolMode::IsoKe, false),
        (ProtocolMode::Sigma, false),
        (ProtocolMode::Tls, true),
    ] {
        let r = run(mode, Strategy::CorruptAfter, 17);
        assert_eq!(r.adversary_success, broken, "{mode}");
        assert_eq!(r.closure_contains_session_key, broken, "{mode}");
        assert_eq!(r.criterion, Criterion::KeyExposedAfterCorruption);
    }
}

#[test]
fn stolen_keys_without_radio_fail_fingerprint_check() {
    for mode in GATED {
        let cfg = ScenarioConfig::new(mode, Strategy::Passive, 18);
        let r = impersonate_corrupted(&cfg).unwrap();
        assert!(!r.adversary_success, "{mode}");
        assert_eq!(r.criterion, Criterion::ImpersonationAccepted);
        assert_eq!(r.party("R").unwrap().abort, Some(AbortKind::FingerprintMismatch), "{mode}");
    }
}

#[test]
fn stolen_keys_and_radio_impersonate() {
    for mode in GATED {
        let mut cfg = ScenarioConfig::new(mode, Strategy::Passive, 19);
        cfg.flags.transceiver_theft = true;
        let r = impersonate_corrupted(&cfg).unwrap();
        let responder = r.party("R").unwrap();
        assert!(r.adversary_success, "{mode}");
        assert_eq!(responder.phase, Phase::Established, "{mode}");
        assert_eq!(responder.peer.as_deref(), Some("S"));
        assert_eq!(responder.actual_peer, "A");
    }
}

#[test]
fn failed_attacks_leave_no_unknown_key_share() {
    for mode in ProtocolMode::ALL {
        for strategy in Strategy::ALL {
            let r = run(mode, strategy, 20);
            if !r.adversary_success {
                assert!(r.unknown_key_share_free(), "{mode} {strategy}");
            }
        }
    }
}

#[test]
fn plain_relay_binds_each_side_to_the_adversary() {
    let r = run(ProtocolMode::PlainPki, Strategy::MitmRelay, 21);
    assert!(r.unknown_key_share_free());
    assert_eq!(r.party("S").unwrap().peer.as_deref(), Some("A"));
    assert_eq!(r.party("R").unwrap().peer.as_deref(), Some("A"));
}

#[test]
fn accepted_replays_are_unknown_key_shares() {
    for strategy in [Strategy::RepetitionV1, Strategy::RepetitionV2] {
        let r = run(ProtocolMode::Base, strategy, 21);
        assert!(r.adversary_success, "{strategy}");
        assert!(!r.unknown_key_share_free(), "{strategy}");
    }
}

#[test]
fn same_seed_same_transcript() {
    for strategy in Strategy::ALL {
        let a = run(ProtocolMode::Sigma, strategy, 22);
        let b = run(ProtocolMode::Sigma, strategy, 22);
        assert_eq!(a.transcript, b.transcript, "{strategy}");
        assert_eq!(a.abort_reasons(), b.abort_reasons());
    }
}

#[test]
fn unreadable_plate_blocks_honest_session() {
    let mut cfg = ScenarioConfig::new(ProtocolMode::Base, Strategy::Passive, 23);
    cfg.noise = NoiseProfile::zero().with(AttributeField::LicenseNumber, 1.0);
    let r = run_scenario(&cfg).unwrap();
    assert!(r.abort_reasons().iter().any(|a| a.ends_with("AttributeMismatch")), "{:?}", r.abort_reasons());
    assert!(!r.adversary_success);
}

#[test]
fn forged_certificates_never_verify() {
    let report = run_forgery(SuiteId::Standard, 40, 24);
    assert_eq!(report.total_attempts(), 40 * 12);
    assert!(report.accepted.is_empty(), "{:?}", report.accepted);
}
