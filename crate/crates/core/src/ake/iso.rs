//! ISO 9798-3 style signed Diffie-Hellman.
//!
//! ```text
//! S → R : Cert_S, g^x
//! R → S : Cert_R, g^y, Sig_R(g^x, g^y, Cert_S)
//! S → R : Sig_S(g^y, g^x, Cert_R)
//! ```

use std::sync::Arc;

use rand_core::RngCore;

use super::fields_digest;
use crate::attributes::SensorReading;
use crate::session::{
    Identity, Phase, ProtocolError, Role, SessionCore, SessionEnv, SessionKey,
};
use crate::suite::{CryptoSuite, DhElement};
use crate::wire::{Frame, WireMessage};

pub const ISO_KDF_LABEL: &[u8] = b"iso";

pub fn iso_session_key(suite: &dyn CryptoSuite, shared: &[u8]) -> SessionKey {
    SessionKey(suite.kdf(ISO_KDF_LABEL, shared))
}

#[derive(Clone, Debug)]
pub struct IsoKeSession {
    core: SessionCore,
    ephemeral: Option<DhElement>,
    peer_element: Option<Vec<u8>>,
    pending: Option<SessionKey>,
}

impl IsoKeSession {
    pub fn initiator(identity: Arc<Identity>, env: Arc<SessionEnv>) -> Self {
        Self::new(Role::Initiator, Phase::Start, identity, env)
    }

    pub fn responder(identity: Arc<Identity>, env: Arc<SessionEnv>) -> Self {
        Self::new(Role::Responder, Phase::AwaitingM1, identity, env)
    }

    fn new(role: Role, phase: Phase, identity: Arc<Identity>, env: Arc<SessionEnv>) -> Self {
        IsoKeSession {
            core: SessionCore::new(role, phase, identity, env),
            ephemeral: None,
            peer_element: None,
            pending: None,
        }
    }

    /// Uses a fixed ephemeral instead of drawing one.
    pub fn with_ephemeral(mut self, ephemeral: DhElement) -> Self {
        self.ephemeral = Some(ephemeral);
        self
    }

    pub fn core(&self) -> &SessionCore {
        &self.core
    }

    pub fn core_mut(&mut self) -> &mut SessionCore {
        &mut self.core
    }

    pub fn holds_exponent(&self) -> bool {
        self.ephemeral.as_ref().is_some_and(|e| e.exponent().is_some())
    }

    /// Advances the handshake. `None` starts the initiator; the returned
    /// frame, if any, goes to the peer.
    pub fn iso_ke_step(
        &mut self,
        incoming: Option<&Frame>,
        reading: &SensorReading,
        rng: &mut dyn RngCore,
    ) -> Result<Option<Frame>, ProtocolError> {
        match (self.core.role, self.core.phase, incoming) {
            (Role::Initiator, Phase::Start, None) => Ok(Some(self.send_first(rng))),
            (Role::Initiator, Phase::AwaitingM2, Some(f)) => self.on_second(f, reading).map(Some),
            (Role::Responder, Phase::AwaitingM1, Some(f)) => {
                self.on_first(f, reading, rng).map(Some)
            }
            (Role::Responder, Phase::AwaitingConfirmation, Some(f)) => {
                self.on_third(f).map(|()| None)
            }
            (_, phase, _) => Err(ProtocolError::ProtocolState(phase)),
        }
    }

    fn take_ephemeral(&mut self, rng: &mut dyn RngCore) -> DhElement {
        match self.ephemeral.take() {
            Some(e) => e,
            None => self.core.suite().dh_keygen(rng),
        }
    }

    fn send_first(&mut self, rng: &mut dyn RngCore) -> Frame {
        let x = self.take_ephemeral(rng);
        let message = WireMessage::IsoKe1 {
            cert: self.core.identity.certificate.clone(),
            dh: x.value().to_vec(),
        };
        self.ephemeral = Some(x);
        self.core.phase = Phase::AwaitingM2;
        self.core.frame(message)
    }

    fn on_first(
        &mut self,
        frame: &Frame,
        reading: &SensorReading,
        rng: &mut dyn RngCore,
    ) -> Result<Frame, ProtocolError> {
        let mut y = self.take_ephemeral(rng);
        let result = self.core.guarded(|core| {
            let WireMessage::IsoKe1 { cert, dh: gx } = &frame.message else {
                return Err(ProtocolError::UnexpectedMessage(frame.tag()));
            };
            core.env.check_peer(cert, frame.fingerprint, reading)?;
            let suite = core.suite();
            suite.dh_validate(gx)?;
            let gy = y.value();
            let digest = fields_digest(suite, &[gx, gy, &cert.to_bytes()]);
            let signature = suite.sign(core.identity.signing.secret(), &digest)?;
            let key = iso_session_key(suite, &suite.dh_shared(&y, gx)?);
            core.peer_certificate = Some(cert.clone());
            core.phase = Phase::AwaitingConfirmation;
            let reply = core.frame(WireMessage::IsoKe2 {
                cert: core.identity.certificate.clone(),
                dh: gy.to_vec(),
                signature: signature.into_bytes(),
            });
            Ok((reply, key, gx.clone()))
        });
        y.forget_exponent();
        self.ephemeral = Some(y);
        let (reply, key, gx) = result?;
        self.pending = Some(key);
        self.peer_element = Some(gx);
        Ok(reply)
    }

    fn on_second(&mut self, frame: &Frame, reading: &SensorReading) -> Result<Frame, ProtocolError> {
        let mut x = self.ephemeral.take().expect("initiator ephemeral set at start");
        let result = self.core.guarded(|core| {
            let WireMessage::IsoKe2 {
                cert,
                dh: gy,
                signature,
            } = &frame.message
            else {
                return Err(ProtocolError::UnexpectedMessage(frame.tag()));
            };
            core.env.check_peer(cert, frame.fingerprint, reading)?;
            let suite = core.suite();
            suite.dh_validate(gy)?;
            let gx = x.value();
            let own_cert = core.identity.certificate.to_bytes();
            let expected = fields_digest(suite, &[gx, gy, &own_cert]);
            if !suite.verify(&cert.signing_public_key, &expected, signature) {
                return Err(ProtocolError::SignatureMismatch);
            }
            let key = iso_session_key(suite, &suite.dh_shared(&x, gy)?);
            let digest = fields_digest(suite, &[gy, gx, &cert.to_bytes()]);
            let own_sig = suite.sign(core.identity.signing.secret(), &digest)?;
            core.peer_certificate = Some(cert.clone());
            core.establish(key);
            Ok(core.frame(WireMessage::IsoKe3 {
                signature: own_sig.into_bytes(),
            }))
        });
        x.forget_exponent();
        self.ephemeral = Some(x);
        result
    }

    fn on_third(&mut self, frame: &Frame) -> Result<(), ProtocolError> {
        let gx = self.peer_element.clone().expect("set with IsoKe2");
        let gy = self
            .ephemeral
            .as_ref()
            .expect("responder ephemeral set")
            .value()
            .to_vec();
        let key = self.pending.expect("set with IsoKe2");
        self.core.guarded(|core| {
            let WireMessage::IsoKe3 { signature } = &frame.message else {
                return Err(ProtocolError::UnexpectedMessage(frame.tag()));
            };
            let peer = core.peer_certificate.clone().expect("set with IsoKe2");
            if core.env.attribute_gate
                && frame.fingerprint != peer.attributes.transceiver_fingerprint
            {
                return Err(ProtocolError::FingerprintMismatch);
            }
            let suite = core.suite();
            let own_cert = core.identity.certificate.to_bytes();
            let expected = fields_digest(suite, &[&gy, &gx, &own_cert]);
            if !suite.verify(&peer.signing_public_key, &expected, signature) {
                return Err(ProtocolError::SignatureMismatch);
            }
            core.establish(key);
            Ok(())
        })?;
        self.pending = None;
        Ok(())
    }
}
