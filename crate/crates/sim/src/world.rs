//! The cast of a scenario: one CA and three enrolled vehicles.

use std::sync::Arc;

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use vauth_core::attributes::AttributeSet;
use vauth_core::certificates::{CertError, Certificate, CertificateAuthority, ValidityWindow};
use vauth_core::session::{Identity, Role, SessionEnv};
use vauth_core::{new_party, Party, ProtocolMode};

use crate::config::ScenarioConfig;

pub const CA_ID: &str = "ca-sim";
pub const DEFAULT_NAMES: [&str; 3] = ["S", "R", "A"];
/// Certificates stay valid this many ticks past the scenario clock.
pub const VALIDITY_SPAN: u64 = 10_000;

#[derive(Debug)]
pub struct World {
    pub cfg: ScenarioConfig,
    pub ca: CertificateAuthority,
    pub env: Arc<SessionEnv>,
    pub s: Arc<Identity>,
    pub r: Arc<Identity>,
    /// The adversary's own vehicle, validly enrolled.
    pub a: Arc<Identity>,
    /// Identities enrolled after the start, such as a renewed S.
    pub extra: Vec<Arc<Identity>>,
}

impl World {
    /// Enrolls the cast. Returns the world and the rng the run continues
    /// with.
    pub fn build(cfg: &ScenarioConfig) -> Result<(World, ChaCha20Rng), CertError> {
        let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
        let mut ca = CertificateAuthority::new(CA_ID, cfg.suite, &mut rng);
        let window = ValidityWindow::new(0, cfg.now + VALIDITY_SPAN);
        let mut enrolled = Vec::with_capacity(3);
        for (i, default) in DEFAULT_NAMES.iter().enumerate() {
            let generated = AttributeSet::random(&mut rng);
            let (name, attrs) = match cfg.vehicles.get(i) {
                Some(spec) => (spec.id.clone(), spec.resolve(generated)),
                None => (default.to_string(), generated),
            };
            let id = Identity::enroll(name, &mut ca, attrs, window, cfg.suite, &mut rng)?;
            enrolled.push(Arc::new(id));
        }
        let mut env = SessionEnv::new(cfg.suite, ca.trust_store(), cfg.now);
        env.data_mode = cfg.flags.data_mode;
        let a = enrolled.pop().expect("three vehicles");
        let r = enrolled.pop().expect("three vehicles");
        let s = enrolled.pop().expect("three vehicles");
        let world = World {
            cfg: cfg.clone(),
            ca,
            env: Arc::new(env),
            s,
            r,
            a,
            extra: Vec::new(),
        };
        Ok((world, rng))
    }

    pub fn mode(&self) -> ProtocolMode {
        self.cfg.mode
    }

    /// Environment for sessions the adversary runs: no attribute gate.
    pub fn adversary_env(&self) -> Arc<SessionEnv> {
        let mut env = (*self.env).clone();
        env.attribute_gate = false;
        Arc::new(env)
    }

    pub fn honest_party(&self, role: Role, identity: &Arc<Identity>) -> Box<dyn Party> {
        new_party(self.cfg.mode, role, identity.clone(), self.env.clone())
    }

    pub fn adversary_party(&self, role: Role, identity: &Arc<Identity>) -> Box<dyn Party> {
        new_party(self.cfg.mode, role, identity.clone(), self.adversary_env())
    }

    /// Renews S's certificate (same keys and attributes, next sequence
    /// number) and returns the renewed identity.
    pub fn renew_s(&mut self) -> Result<Arc<Identity>, CertError> {
        let window = ValidityWindow::new(0, self.cfg.now + VALIDITY_SPAN);
        let certificate = self.ca.renew(&self.s.certificate, None, None, window)?;
        let mut renewed = (*self.s).clone();
        renewed.certificate = certificate;
        let renewed = Arc::new(renewed);
        self.extra.push(renewed.clone());
        Ok(renewed)
    }

    /// Name of the enrolled vehicle holding `cert`, if any.
    pub fn name_of(&self, cert: &Certificate) -> Option<&str> {
        [&self.s, &self.r, &self.a]
            .into_iter()
            .chain(&self.extra)
            .find(|id| &id.certificate == cert)
            .map(|id| id.name.as_str())
    }
}
