//! Wire-format test vectors: fixed-seed honest sessions plus the encoding
//! building blocks, as `name = hex` lines.

use vauth_core::certificates::{compose3, pad_compose};
use vauth_core::hardened::FS_KDF_LABEL;
use vauth_core::session::sequence_bytes;
use vauth_core::suite::SuiteId;
use vauth_core::ProtocolMode;

use crate::config::{ScenarioConfig, Strategy};
use crate::scenario::{run_scenario, ScenarioError};
use crate::world::World;

pub const VECTOR_SEED: u64 = 0x7661_7574_6800_0001;

fn push(out: &mut String, name: &str, bytes: &[u8]) {
    out.push_str(name);
    out.push_str(" = ");
    out.push_str(&hex::encode(bytes));
    out.push('\n');
}

/// All vectors for `suite`. Byte-identical across runs and platforms.
pub fn generate(suite: SuiteId) -> Result<String, ScenarioError> {
    let mut out = format!("# vauth wire vectors\n# suite={suite} seed={VECTOR_SEED}\n");
    let s = suite.suite();

    out.push_str("\n# building blocks\n");
    push(&mut out, "compose.pad(\"key\",seq=5)", &pad_compose(b"key", &sequence_bytes(5)));
    push(&mut out, "compose.three(\"a\",\"bc\",\"\")", &compose3(b"a", b"bc", b""));
    push(&mut out, "hash(\"abc\")", s.hash(b"abc").as_bytes());
    push(&mut out, "kdf(\"iso\",\"abc\")", &s.kdf(b"iso", b"abc"));
    push(&mut out, "kdf(\"vanet-fs-v1\",\"abc\")", &s.kdf(FS_KDF_LABEL, b"abc"));
    push(&mut out, "keystream(\"seed\",24)", &s.keystream(b"seed", 24));

    let mut cfg = ScenarioConfig::new(ProtocolMode::Base, Strategy::Passive, VECTOR_SEED);
    cfg.suite = suite;
    cfg.id = "vectors".into();
    let (world, _) = World::build(&cfg)?;
    out.push_str("\n# enrollment\n");
    for id in [&world.s, &world.r, &world.a] {
        push(
            &mut out,
            &format!("attributes.{}", id.name),
            &id.attributes.canonical_encode().expect("generated attributes are valid"),
        );
        push(&mut out, &format!("certificate.{}", id.name), &id.certificate.to_bytes());
    }
    push(&mut out, "ca.public_key", world.ca.public_key());

    for mode in ProtocolMode::ALL {
        let mut cfg = cfg.clone();
        cfg.mode = mode;
        let result = run_scenario(&cfg)?;
        out.push_str(&format!("\n# {mode}: honest session\n"));
        for r in &result.transcript.records {
            push(&mut out, &format!("frame.{mode}.{}.{}.{}>{}", r.tick, r.tag, r.from, r.to), &r.frame);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(SuiteId::Toy).unwrap(), generate(SuiteId::Toy).unwrap());
    }

    #[test]
    fn every_frame_decodes() {
        let text = generate(SuiteId::Toy).unwrap();
        let frames: Vec<_> = text.lines().filter(|l| l.starts_with("frame.")).collect();
        assert!(frames.len() > 20);
        for line in frames {
            let (_, hex_part) = line.split_once(" = ").unwrap();
            let bytes = hex::decode(hex_part).unwrap();
            assert_eq!(vauth_core::wire::Frame::decode(&bytes).unwrap().encode(), bytes);
        }
    }
}
