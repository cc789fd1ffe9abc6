//! Uniform driver over every protocol mode.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::ake::iso::IsoKeSession;
use crate::ake::sigma::SigmaSession;
use crate::ake::tls::TlsSession;
use crate::attributes::SensorReading;
use crate::base::BaseSession;
use crate::certificates::Certificate;
use crate::hardened::{HardenedConfig, HardenedMode, HardenedSession};
use crate::session::{Identity, Phase, ProtocolError, Role, SessionCore, SessionEnv, SessionKey};
use crate::wire::{Frame, WireMessage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolMode {
    PlainPki,
    Base,
    NonceAck,
    FsDh,
    IsoKe,
    Sigma,
    Tls,
}

impl ProtocolMode {
    pub const ALL: [ProtocolMode; 7] = [
        ProtocolMode::PlainPki,
        ProtocolMode::Base,
        ProtocolMode::NonceAck,
        ProtocolMode::FsDh,
        ProtocolMode::IsoKe,
        ProtocolMode::Sigma,
        ProtocolMode::Tls,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolMode::PlainPki => "plain_pki",
            ProtocolMode::Base => "base",
            ProtocolMode::NonceAck => "nonce_ack",
            ProtocolMode::FsDh => "fs_dh",
            ProtocolMode::IsoKe => "iso_ke",
            ProtocolMode::Sigma => "sigma",
            ProtocolMode::Tls => "tls",
        }
    }

    /// Modes built on the two-round message pair (M1/M2 or M1h/M2h).
    pub fn is_two_round(self) -> bool {
        matches!(
            self,
            ProtocolMode::PlainPki | ProtocolMode::Base | ProtocolMode::NonceAck | ProtocolMode::FsDh
        )
    }
}

impl fmt::Display for ProtocolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProtocolMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = ProtocolMode::ALL.iter().map(|m| m.as_str()).collect();
                format!("unknown mode `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// One side of a session in any mode.
pub trait Party: Send + fmt::Debug {
    fn mode(&self) -> ProtocolMode;

    fn core(&self) -> &SessionCore;

    fn core_mut(&mut self) -> &mut SessionCore;

    /// Initiator's opening frames. Responders return a phase error.
    fn start(&mut self, rng: &mut dyn RngCore) -> Result<Vec<Frame>, ProtocolError>;

    /// Feeds one handshake frame; returns frames to send back.
    fn handle(
        &mut self,
        frame: &Frame,
        reading: &SensorReading,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Frame>, ProtocolError>;

    fn role(&self) -> Role {
        self.core().role
    }

    fn phase(&self) -> Phase {
        self.core().phase
    }

    fn identity(&self) -> &Arc<Identity> {
        &self.core().identity
    }

    fn session_key(&self) -> Option<SessionKey> {
        self.core().session_key
    }

    fn peer_certificate(&self) -> Option<&Certificate> {
        self.core().peer_certificate.as_ref()
    }

    fn abort_reason(&self) -> Option<&ProtocolError> {
        self.core().abort_reason.as_ref()
    }

    /// Whether an ephemeral DH exponent is still held in memory.
    fn holds_exponent(&self) -> bool {
        false
    }

    fn seal(&mut self, plaintext: &[u8]) -> Result<Frame, ProtocolError> {
        self.core_mut().seal(plaintext)
    }

    fn open(&self, frame: &Frame) -> Result<Vec<u8>, ProtocolError> {
        self.core().open(frame)
    }
}

/// Builds a party. `PlainPki` runs the base protocol with the attribute
/// gate switched off.
pub fn new_party(
    mode: ProtocolMode,
    role: Role,
    identity: Arc<Identity>,
    env: Arc<SessionEnv>,
) -> Box<dyn Party> {
    let initiator = role == Role::Initiator;
    match mode {
        ProtocolMode::PlainPki | ProtocolMode::Base => {
            let env = if mode == ProtocolMode::PlainPki && env.attribute_gate {
                let mut plain = (*env).clone();
                plain.attribute_gate = false;
                Arc::new(plain)
            } else {
                env
            };
            let session = if initiator {
                BaseSession::initiator(identity, env)
            } else {
                BaseSession::responder(identity, env)
            };
            Box::new(BaseParty { mode, session })
        }
        ProtocolMode::NonceAck | ProtocolMode::FsDh => {
            let cfg = HardenedConfig {
                mode: if mode == ProtocolMode::NonceAck {
                    HardenedMode::NonceAck
                } else {
                    HardenedMode::FsDh
                },
            };
            let session = if initiator {
                HardenedSession::initiator(identity, env, cfg)
            } else {
                HardenedSession::responder(identity, env, cfg)
            };
            Box::new(HardenedParty { mode, session })
        }
        ProtocolMode::IsoKe => Box::new(if initiator {
            IsoKeSession::initiator(identity, env)
        } else {
            IsoKeSession::responder(identity, env)
        }),
        ProtocolMode::Sigma => Box::new(if initiator {
            SigmaSession::initiator(identity, env)
        } else {
            SigmaSession::responder(identity, env)
        }),
        ProtocolMode::Tls => Box::new(if initiator {
            TlsSession::initiator(identity, env)
        } else {
            TlsSession::responder(identity, env)
        }),
    }
}

fn not_initiator(core: &SessionCore) -> ProtocolError {
    ProtocolError::ProtocolState(core.phase)
}

#[derive(Clone, Debug)]
struct BaseParty {
    mode: ProtocolMode,
    session: BaseSession,
}

impl Party for BaseParty {
    fn mode(&self) -> ProtocolMode {
        self.mode
    }

    fn core(&self) -> &SessionCore {
        self.session.core()
    }

    fn core_mut(&mut self) -> &mut SessionCore {
        self.session.core_mut()
    }

    fn start(&mut self, _rng: &mut dyn RngCore) -> Result<Vec<Frame>, ProtocolError> {
        if self.role() != Role::Initiator {
            return Err(not_initiator(self.core()));
        }
        Ok(vec![self.session.initiator_start()?])
    }

    fn handle(
        &mut self,
        frame: &Frame,
        reading: &SensorReading,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Frame>, ProtocolError> {
        match self.role() {
            Role::Responder => Ok(vec![self.session.responder_on_m1(frame, reading, rng)?]),
            Role::Initiator => {
                self.session.initiator_on_m2(frame, reading)?;
                Ok(Vec::new())
            }
        }
    }
}

#[derive(Clone, Debug)]
struct HardenedParty {
    mode: ProtocolMode,
    session: HardenedSession,
}

impl Party for HardenedParty {
    fn mode(&self) -> ProtocolMode {
        self.mode
    }

    fn core(&self) -> &SessionCore {
        self.session.core()
    }

    fn core_mut(&mut self) -> &mut SessionCore {
        self.session.core_mut()
    }

    fn holds_exponent(&self) -> bool {
        self.session.holds_exponent()
    }

    fn start(&mut self, rng: &mut dyn RngCore) -> Result<Vec<Frame>, ProtocolError> {
        if self.role() != Role::Initiator {
            return Err(not_initiator(self.core()));
        }
        Ok(vec![self.session.h_initiator_start(rng)?])
    }

    fn handle(
        &mut self,
        frame: &Frame,
        reading: &SensorReading,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Frame>, ProtocolError> {
        match (self.role(), self.phase()) {
            (Role::Responder, Phase::AwaitingAck) => {
                self.session.h_responder_on_ack(frame)?;
                Ok(Vec::new())
            }
            (Role::Responder, _) => Ok(vec![self.session.h_responder_on_m1(frame, reading, rng)?]),
            (Role::Initiator, _) => Ok(vec![self.session.h_initiator_on_m2(frame, reading)?]),
        }
    }
}

impl Party for IsoKeSession {
    fn mode(&self) -> ProtocolMode {
        ProtocolMode::IsoKe
    }

    fn core(&self) -> &SessionCore {
        IsoKeSession::core(self)
    }

    fn core_mut(&mut self) -> &mut SessionCore {
        IsoKeSession::core_mut(self)
    }

    fn holds_exponent(&self) -> bool {
        IsoKeSession::holds_exponent(self)
    }

    fn start(&mut self, rng: &mut dyn RngCore) -> Result<Vec<Frame>, ProtocolError> {
        let reading = SensorReading::exact(&self.core().identity.attributes);
        Ok(self.iso_ke_step(None, &reading, rng)?.into_iter().collect())
    }

    fn handle(
        &mut self,
        frame: &Frame,
        reading: &SensorReading,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Frame>, ProtocolError> {
        Ok(self.iso_ke_step(Some(frame), reading, rng)?.into_iter().collect())
    }
}

impl Party for SigmaSession {
    fn mode(&self) -> ProtocolMode {
        ProtocolMode::Sigma
    }

    fn core(&self) -> &SessionCore {
        SigmaSession::core(self)
    }

    fn core_mut(&mut self) -> &mut SessionCore {
        SigmaSession::core_mut(self)
    }

    fn holds_exponent(&self) -> bool {
        SigmaSession::holds_exponent(self)
    }

    fn start(&mut self, rng: &mut dyn RngCore) -> Result<Vec<Frame>, ProtocolError> {
        let reading = SensorReading::exact(&self.core().identity.attributes);
        Ok(self.sigma_step(None, &reading, rng)?.into_iter().collect())
    }

    fn handle(
        &mut self,
        frame: &Frame,
        reading: &SensorReading,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Frame>, ProtocolError> {
        Ok(self.sigma_step(Some(frame), reading, rng)?.into_iter().collect())
    }
}

impl Party for TlsSession {
    fn mode(&self) -> ProtocolMode {
        ProtocolMode::Tls
    }

    fn core(&self) -> &SessionCore {
        TlsSession::core(self)
    }

    fn core_mut(&mut self) -> &mut SessionCore {
        TlsSession::core_mut(self)
    }

    fn start(&mut self, rng: &mut dyn RngCore) -> Result<Vec<Frame>, ProtocolError> {
        let reading = SensorReading::exact(&self.core().identity.attributes);
        self.tls_step(None, &reading, rng)
    }

    fn handle(
        &mut self,
        frame: &Frame,
        reading: &SensorReading,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Frame>, ProtocolError> {
        self.tls_step(Some(frame), reading, rng)
    }
}

/// True for frames that belong to the handshake rather than the data phase.
pub fn is_handshake(frame: &Frame) -> bool {
    !matches!(frame.message, WireMessage::Data { .. })
}
