#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vauth_core::attributes::{AttributeSet, SensorReading};
use vauth_core::certificates::{CertificateAuthority, ValidityWindow};
use vauth_core::session::{DataMode, Identity, Role, SessionEnv};
use vauth_core::suite::SuiteId;
use vauth_core::wire::Frame;
use vauth_core::{new_party, Party, ProtocolMode};

pub const NOW: u64 = 1_000;
pub const WINDOW: ValidityWindow = ValidityWindow {
    valid_from: 0,
    valid_to: 10_000,
};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub struct Pair {
    pub ca: CertificateAuthority,
    pub s: Arc<Identity>,
    pub r: Arc<Identity>,
    pub env: Arc<SessionEnv>,
    pub rng: ChaCha20Rng,
}

impl Pair {
    pub fn new(suite: SuiteId, seed: u64) -> Pair {
        Self::with_mode(suite, seed, DataMode::Keystream)
    }

    pub fn with_mode(suite: SuiteId, seed: u64, data_mode: DataMode) -> Pair {
        let mut rng = rng(seed);
        let mut ca = CertificateAuthority::new("ca-test", suite, &mut rng);
        let s = enroll("S", &mut ca, suite, &mut rng);
        let r = enroll("R", &mut ca, suite, &mut rng);
        let mut env = SessionEnv::new(suite, ca.trust_store(), NOW);
        env.data_mode = data_mode;
        Pair {
            ca,
            s: Arc::new(s),
            r: Arc::new(r),
            env: Arc::new(env),
            rng,
        }
    }

    pub fn third(&mut self, name: &str) -> Arc<Identity> {
        let suite = self.env.suite;
        Arc::new(enroll(name, &mut self.ca, suite, &mut self.rng))
    }

    pub fn parties(&self, mode: ProtocolMode) -> (Box<dyn Party>, Box<dyn Party>) {
        (
            new_party(mode, Role::Initiator, self.s.clone(), self.env.clone()),
            new_party(mode, Role::Responder, self.r.clone(), self.env.clone()),
        )
    }
}

pub fn enroll(
    name: &str,
    ca: &mut CertificateAuthority,
    suite: SuiteId,
    rng: &mut ChaCha20Rng,
) -> Identity {
    let attrs = AttributeSet::random(rng);
    Identity::enroll(name, ca, attrs, WINDOW, suite, rng).unwrap()
}

/// Runs a handshake between `s` and `r` with exact sensing and returns
/// every frame in delivery order.
pub fn handshake(
    s: &mut dyn Party,
    r: &mut dyn Party,
    rng: &mut ChaCha20Rng,
) -> Vec<Frame> {
    let s_truth = SensorReading::exact(&s.identity().attributes);
    let r_truth = SensorReading::exact(&r.identity().attributes);
    let mut log = Vec::new();
    let mut queue: VecDeque<(bool, Frame)> =
        s.start(rng).unwrap().into_iter().map(|f| (true, f)).collect();
    while let Some((to_r, frame)) = queue.pop_front() {
        log.push(frame.clone());
        let out = if to_r {
            r.handle(&frame, &s_truth, rng)
        } else {
            s.handle(&frame, &r_truth, rng)
        };
        let Ok(out) = out else { break };
        queue.extend(out.into_iter().map(|f| (!to_r, f)));
    }
    log
}
