mod common;

use proptest::prelude::*;
use vauth_core::attributes::Fingerprint;
use vauth_core::certificates::Certificate;
use vauth_core::suite::SuiteId;
use vauth_core::wire::{raw_frame_fields, Frame, Tag, WireError, WireMessage};

use common::Pair;

fn sample_cert() -> Certificate {
    Pair::new(SuiteId::Toy, 70).s.certificate.clone()
}

fn bytes() -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(any::<u8>(), 0..64)
}

fn suites() -> impl Strategy<Value = Vec<String>> {
    proptest::collection::vec("[a-z0-9-]{1,8}", 0..4)
}

fn message(cert: Certificate) -> impl Strategy<Value = WireMessage> {
    let c = move || Just(cert.clone());
    prop_oneof![
        c().prop_map(|cert| WireMessage::M1 { cert }),
        (c(), bytes(), bytes()).prop_map(|(cert, enc_key_blob, enc_sig_blob)| WireMessage::M2 {
            cert,
            enc_key_blob,
            enc_sig_blob
        }),
        bytes().prop_map(|ciphertext| WireMessage::Ack { ciphertext }),
        bytes().prop_map(|ciphertext| WireMessage::Data { ciphertext }),
        (c(), bytes()).prop_map(|(cert, nonce)| WireMessage::M1h { cert, nonce }),
        (c(), bytes(), bytes()).prop_map(|(cert, enc_key_blob, enc_sig_blob)| WireMessage::M2h {
            cert,
            enc_key_blob,
            enc_sig_blob
        }),
        (c(), bytes()).prop_map(|(cert, dh)| WireMessage::IsoKe1 { cert, dh }),
        (c(), bytes(), bytes()).prop_map(|(cert, dh, signature)| WireMessage::IsoKe2 {
            cert,
            dh,
            signature
        }),
        bytes().prop_map(|signature| WireMessage::IsoKe3 { signature }),
        bytes().prop_map(|dh| WireMessage::Sigma1 { dh }),
        (bytes(), bytes()).prop_map(|(dh, sealed)| WireMessage::Sigma2 { dh, sealed }),
        bytes().prop_map(|sealed| WireMessage::Sigma3 { sealed }),
        (any::<u16>(), suites(), bytes()).prop_map(|(version, suites, random)| {
            WireMessage::TlsClientHello {
                version,
                suites,
                random,
            }
        }),
        (any::<u16>(), suites(), bytes(), c(), any::<bool>()).prop_map(
            |(version, suites, random, cert, request_cert)| WireMessage::TlsServerHello {
                version,
                suites,
                random,
                cert,
                request_cert
            }
        ),
        (bytes(), c()).prop_map(|(enc_premaster, cert)| WireMessage::TlsKeyExchange {
            enc_premaster,
            cert
        }),
        bytes().prop_map(|sealed| WireMessage::TlsFinished { sealed }),
    ]
}

proptest! {
    #[test]
    fn frames_roundtrip(msg in message(sample_cert()), fp in any::<[u8; 8]>()) {
        let frame = Frame::new(Fingerprint(fp), msg);
        let enc = frame.encode();
        prop_assert_eq!(enc[0], frame.tag().code());
        prop_assert_eq!(&enc[1..9], &fp[..]);
        let back = Frame::decode(&enc).unwrap();
        prop_assert_eq!(&back, &frame);
        prop_assert_eq!(back.encode(), enc.clone());
        prop_assert_eq!(WireMessage::decode(&frame.message.encode()).unwrap(), frame.message.clone());

        let (tag, fp2, fields) = raw_frame_fields(&enc).unwrap();
        prop_assert_eq!(tag, frame.tag());
        prop_assert_eq!(fp2, frame.fingerprint);
        prop_assert_eq!(fields.len(), tag.schema().len());
        prop_assert_eq!(fields, frame.message.field_bytes());
    }

    #[test]
    fn truncations_never_decode(msg in message(sample_cert()), cut in 1usize..40) {
        let enc = Frame::new(Fingerprint([1; 8]), msg).encode();
        let cut = cut.min(enc.len());
        prop_assert!(Frame::decode(&enc[..enc.len() - cut]).is_err());
    }
}

#[test]
fn tag_codes_are_unique_and_stable() {
    let codes: Vec<u8> = Tag::ALL.iter().map(|t| t.code()).collect();
    assert_eq!(
        codes,
        [0x01, 0x02, 0x03, 0x04, 0x11, 0x12, 0x21, 0x22, 0x23, 0x31, 0x32, 0x33, 0x41, 0x42, 0x43, 0x44]
    );
    for t in Tag::ALL {
        assert_eq!(Tag::from_code(t.code()), Some(t));
    }
    assert_eq!(Tag::from_code(0x05), None);
}

#[test]
fn layout_is_tag_fingerprint_then_u32_prefixed_fields() {
    let f = Frame::new(
        Fingerprint([0xaa; 8]),
        WireMessage::Sigma2 {
            dh: vec![1, 2],
            sealed: vec![3],
        },
    );
    assert_eq!(
        f.encode(),
        [
            vec![0x32],
            vec![0xaa; 8],
            vec![0, 0, 0, 2, 1, 2],
            vec![0, 0, 0, 1, 3]
        ]
        .concat()
    );
}

#[test]
fn malformed_frames_are_rejected() {
    assert!(matches!(Frame::decode(&[0x7f; 20]), Err(WireError::UnknownTag(0x7f))));
    assert!(Frame::decode(&[0x03, 1, 2]).is_err());
    // Ack with two fields
    let mut two = vec![0x03];
    two.extend([0u8; 8]);
    two.extend([0, 0, 0, 0, 0, 0, 0, 0]);
    assert!(matches!(
        Frame::decode(&two),
        Err(WireError::FieldCount { expected: 1, found: 2, .. })
    ));
    // trailing partial length prefix
    let mut trailing = Frame::new(Fingerprint([0; 8]), WireMessage::Ack { ciphertext: vec![9] }).encode();
    trailing.push(0);
    assert!(Frame::decode(&trailing).is_err());
    // request_cert flag must be a single 0/1 octet
    let cert = sample_cert();
    let hello = WireMessage::TlsServerHello {
        version: 1,
        suites: vec!["a".into()],
        random: vec![],
        cert,
        request_cert: true,
    };
    let mut enc = hello.encode();
    let last = enc.len() - 1;
    enc[last] = 2;
    assert!(matches!(
        WireMessage::decode(&enc),
        Err(WireError::BadField("request_cert"))
    ));
}
