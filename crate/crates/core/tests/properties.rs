mod common;

use proptest::prelude::*;
use vauth_core::attributes::{match_attributes, sense, AttributeSet, NoiseProfile};
use vauth_core::certificates::{compose3, pad_compose, validate_compose3, validate_pad_compose};
use vauth_core::session::Phase;
use vauth_core::suite::SuiteId;
use vauth_core::ProtocolMode;

use common::Pair;

fn mode() -> impl Strategy<Value = ProtocolMode> {
    proptest::sample::select(ProtocolMode::ALL.to_vec())
}

fn suite() -> impl Strategy<Value = SuiteId> {
    proptest::sample::select(SuiteId::ALL.to_vec())
}

proptest! {
    #[test]
    fn zero_noise_sensing_always_matches(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let a = AttributeSet::random(&mut rng);
        let reading = sense(&a, &NoiseProfile::zero(), &mut rng);
        let report = match_attributes(&a, &reading);
        prop_assert!(report.overall);
        prop_assert_eq!(report, match_attributes(&a, &reading));
    }

    #[test]
    fn attribute_encoding_roundtrips(seed in any::<u64>()) {
        let a = AttributeSet::random(&mut common::rng(seed));
        let enc = a.canonical_encode().unwrap();
        let back = AttributeSet::canonical_decode(&enc).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(back.canonical_encode().unwrap(), enc);
    }

    #[test]
    fn compositions_roundtrip(
        a in proptest::collection::vec(any::<u8>(), 0..100),
        b in proptest::collection::vec(any::<u8>(), 0..100),
        c in proptest::collection::vec(any::<u8>(), 0..100),
    ) {
        let two = pad_compose(&a, &b);
        prop_assert_eq!(two.len() % 16, 0);
        prop_assert_eq!(validate_pad_compose(&two).unwrap(), (a.clone(), b.clone()));
        let three = compose3(&a, &b, &c);
        prop_assert_eq!(three.len() % 16, 0);
        prop_assert_eq!(validate_compose3(&three).unwrap(), (a, b, c));
    }

    #[test]
    fn any_nonzero_padding_byte_is_rejected(len in 0usize..14, pos in 0usize..14, v in 1u8..=255) {
        let composed = pad_compose(&vec![7u8; len], b"x");
        let pad_start = 2 + len;
        prop_assume!(pad_start + pos < 16);
        let mut bad = composed.clone();
        bad[pad_start + pos] = v;
        prop_assert!(validate_pad_compose(&bad).is_err());
    }

    #[test]
    fn honest_sessions_agree(mode in mode(), suite in suite(), seed in any::<u64>()) {
        let mut p = Pair::new(suite, seed);
        let (mut s, mut r) = p.parties(mode);
        common::handshake(s.as_mut(), r.as_mut(), &mut p.rng);
        prop_assert_eq!(s.phase(), Phase::Established);
        prop_assert_eq!(r.phase(), Phase::Established);
        prop_assert!(s.session_key().is_some());
        prop_assert_eq!(s.session_key(), r.session_key());
    }

    /// The key is present exactly when the phase is Established, at every
    /// step of a run, including runs cut short by a corrupted frame.
    #[test]
    fn key_iff_established(mode in mode(), seed in any::<u64>(), corrupt_at in 0usize..6, byte in any::<usize>()) {
        let mut p = Pair::new(SuiteId::Toy, seed);
        let (mut s, mut r) = p.parties(mode);
        let s_truth = vauth_core::attributes::SensorReading::exact(&p.s.attributes);
        let r_truth = vauth_core::attributes::SensorReading::exact(&p.r.attributes);
        let mut queue: std::collections::VecDeque<(bool, vauth_core::wire::Frame)> =
            s.start(&mut p.rng).unwrap().into_iter().map(|f| (true, f)).collect();
        let mut step = 0;
        while let Some((to_r, mut frame)) = queue.pop_front() {
            if step == corrupt_at {
                let mut enc = frame.encode();
                let i = 9 + byte % (enc.len() - 9);
                enc[i] ^= 0x01;
                match vauth_core::wire::Frame::decode(&enc) {
                    Ok(f) => frame = f,
                    Err(_) => break,
                }
            }
            step += 1;
            let out = if to_r {
                r.handle(&frame, &s_truth, &mut p.rng)
            } else {
                s.handle(&frame, &r_truth, &mut p.rng)
            };
            for party in [&s, &r] {
                prop_assert_eq!(party.session_key().is_some(), party.phase() == Phase::Established);
            }
            match out {
                Ok(out) => queue.extend(out.into_iter().map(|f| (!to_r, f))),
                Err(_) => break,
            }
        }
    }
}
