//! SIGMA-I: identities travel encrypted under a handshake key, and each
//! side MACs its own identity under a separate key.
//!
//! ```text
//! S → R : g^x
//! R → S : g^y, AE_Ke{Cert_R, Sig_R(g^x, g^y), MAC_Km(Cert_R)}
//! S → R : AE_Ke{Cert_S, Sig_S(g^x, g^y), MAC_Km(Cert_S)}
//! ```
//!
//! Receivers check in a fixed order: decrypt, certificate, signature, MAC,
//! attributes, transceiver.

use std::sync::Arc;

use rand_core::RngCore;

use super::fields_digest;
use crate::attributes::SensorReading;
use crate::certificates::{verify_certificate, Certificate};
use crate::codec::{join_long_fields, split_long_fields};
use crate::session::{
    Identity, Phase, ProtocolError, Role, SessionCore, SessionEnv, SessionKey,
};
use crate::suite::{ct_eq, CryptoSuite, DhElement, AEAD_NONCE_LEN, SYMMETRIC_KEY_LEN};
use crate::wire::{Frame, WireError, WireMessage};

pub const SESSION_LABEL: &[u8] = b"sigma/ks";
pub const ENCRYPTION_LABEL: &[u8] = b"sigma/ke";
pub const MAC_LABEL: &[u8] = b"sigma/km";

/// AEAD nonce for the responder's (message 2) and initiator's (message 3)
/// identity blocks.
pub const RESPONDER_NONCE: [u8; AEAD_NONCE_LEN] = [2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0];
pub const INITIATOR_NONCE: [u8; AEAD_NONCE_LEN] = [3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SigmaKeys {
    pub session: [u8; SYMMETRIC_KEY_LEN],
    pub encryption: [u8; SYMMETRIC_KEY_LEN],
    pub mac: [u8; SYMMETRIC_KEY_LEN],
}

pub fn derive_keys(suite: &dyn CryptoSuite, shared: &[u8]) -> SigmaKeys {
    SigmaKeys {
        session: suite.kdf(SESSION_LABEL, shared),
        encryption: suite.kdf(ENCRYPTION_LABEL, shared),
        mac: suite.kdf(MAC_LABEL, shared),
    }
}

/// What both sides sign: `(g^x, g^y)` in initiator-first order.
pub fn signed_digest(suite: &dyn CryptoSuite, gx: &[u8], gy: &[u8]) -> crate::suite::Digest {
    fields_digest(suite, &[gx, gy])
}

/// Seals `cert ‖ signature ‖ mac` for the given direction.
#[allow(clippy::too_many_arguments)]
pub fn seal_identity(
    suite: &dyn CryptoSuite,
    encryption_key: &[u8; SYMMETRIC_KEY_LEN],
    nonce: &[u8; AEAD_NONCE_LEN],
    gx: &[u8],
    gy: &[u8],
    cert: &[u8],
    signature: &[u8],
    mac: &[u8],
) -> Vec<u8> {
    let aad = [gx, gy].concat();
    suite.aead_seal(
        encryption_key,
        nonce,
        &aad,
        &join_long_fields([cert, signature, mac]),
    )
}

#[derive(Clone, Debug)]
pub struct SigmaSession {
    core: SessionCore,
    ephemeral: Option<DhElement>,
    peer_element: Option<Vec<u8>>,
    keys: Option<SigmaKeys>,
}

impl SigmaSession {
    pub fn initiator(identity: Arc<Identity>, env: Arc<SessionEnv>) -> Self {
        Self::new(Role::Initiator, Phase::Start, identity, env)
    }

    pub fn responder(identity: Arc<Identity>, env: Arc<SessionEnv>) -> Self {
        Self::new(Role::Responder, Phase::AwaitingM1, identity, env)
    }

    fn new(role: Role, phase: Phase, identity: Arc<Identity>, env: Arc<SessionEnv>) -> Self {
        SigmaSession {
            core: SessionCore::new(role, phase, identity, env),
            ephemeral: None,
            peer_element: None,
            keys: None,
        }
    }

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

    pub fn sigma_step(
        &mut self,
        incoming: Option<&Frame>,
        reading: &SensorReading,
        rng: &mut dyn RngCore,
    ) -> Result<Option<Frame>, ProtocolError> {
        match (self.core.role, self.core.phase, incoming) {
            (Role::Initiator, Phase::Start, None) => Ok(Some(self.send_first(rng))),
            (Role::Initiator, Phase::AwaitingM2, Some(f)) => self.on_second(f, reading).map(Some),
            (Role::Responder, Phase::AwaitingM1, Some(f)) => self.on_first(f, rng).map(Some),
            (Role::Responder, Phase::AwaitingConfirmation, Some(f)) => {
                self.on_third(f, reading).map(|()| None)
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
        let message = WireMessage::Sigma1 {
            dh: x.value().to_vec(),
        };
        self.ephemeral = Some(x);
        self.core.phase = Phase::AwaitingM2;
        self.core.frame(message)
    }

    fn on_first(&mut self, frame: &Frame, rng: &mut dyn RngCore) -> Result<Frame, ProtocolError> {
        let mut y = self.take_ephemeral(rng);
        let result = self.core.guarded(|core| {
            let WireMessage::Sigma1 { dh: gx } = &frame.message else {
                return Err(ProtocolError::UnexpectedMessage(frame.tag()));
            };
            let suite = core.suite();
            suite.dh_validate(gx)?;
            let gy = y.value();
            let keys = derive_keys(suite, &suite.dh_shared(&y, gx)?);
            let sealed = own_identity_block(core, &keys, &RESPONDER_NONCE, gx, gy)?;
            core.phase = Phase::AwaitingConfirmation;
            let reply = core.frame(WireMessage::Sigma2 {
                dh: gy.to_vec(),
                sealed,
            });
            Ok((reply, keys, gx.clone()))
        });
        y.forget_exponent();
        self.ephemeral = Some(y);
        let (reply, keys, gx) = result?;
        self.keys = Some(keys);
        self.peer_element = Some(gx);
        Ok(reply)
    }

    fn on_second(&mut self, frame: &Frame, reading: &SensorReading) -> Result<Frame, ProtocolError> {
        let mut x = self.ephemeral.take().expect("initiator ephemeral set at start");
        let result = self.core.guarded(|core| {
            let WireMessage::Sigma2 { dh: gy, sealed } = &frame.message else {
                return Err(ProtocolError::UnexpectedMessage(frame.tag()));
            };
            let suite = core.suite();
            suite.dh_validate(gy)?;
            let gx = x.value();
            let keys = derive_keys(suite, &suite.dh_shared(&x, gy)?);
            let peer = open_identity_block(
                core,
                &keys,
                &RESPONDER_NONCE,
                gx,
                gy,
                sealed,
                frame,
                reading,
            )?;
            let sealed = own_identity_block(core, &keys, &INITIATOR_NONCE, gx, gy)?;
            core.peer_certificate = Some(peer);
            core.establish(SessionKey(keys.session));
            Ok(core.frame(WireMessage::Sigma3 { sealed }))
        });
        x.forget_exponent();
        self.ephemeral = Some(x);
        result
    }

    fn on_third(&mut self, frame: &Frame, reading: &SensorReading) -> Result<(), ProtocolError> {
        let keys = self.keys.expect("set with Sigma2");
        let gx = self.peer_element.clone().expect("set with Sigma2");
        let gy = self
            .ephemeral
            .as_ref()
            .expect("responder ephemeral set")
            .value()
            .to_vec();
        self.core.guarded(|core| {
            let WireMessage::Sigma3 { sealed } = &frame.message else {
                return Err(ProtocolError::UnexpectedMessage(frame.tag()));
            };
            let peer = open_identity_block(
                core,
                &keys,
                &INITIATOR_NONCE,
                &gx,
                &gy,
                sealed,
                frame,
                reading,
            )?;
            core.peer_certificate = Some(peer);
            core.establish(SessionKey(keys.session));
            Ok(())
        })?;
        self.keys = None;
        Ok(())
    }
}

fn own_identity_block(
    core: &SessionCore,
    keys: &SigmaKeys,
    nonce: &[u8; AEAD_NONCE_LEN],
    gx: &[u8],
    gy: &[u8],
) -> Result<Vec<u8>, ProtocolError> {
    let suite = core.suite();
    let cert = core.identity.certificate.to_bytes();
    let signature = suite.sign(core.identity.signing.secret(), &signed_digest(suite, gx, gy))?;
    let mac = suite.mac(&keys.mac, &cert);
    Ok(seal_identity(
        suite,
        &keys.encryption,
        nonce,
        gx,
        gy,
        &cert,
        signature.as_bytes(),
        &mac,
    ))
}

#[allow(clippy::too_many_arguments)]
fn open_identity_block(
    core: &SessionCore,
    keys: &SigmaKeys,
    nonce: &[u8; AEAD_NONCE_LEN],
    gx: &[u8],
    gy: &[u8],
    sealed: &[u8],
    frame: &Frame,
    reading: &SensorReading,
) -> Result<Certificate, ProtocolError> {
    let suite = core.suite();
    let aad = [gx, gy].concat();
    let inner = suite
        .aead_open(&keys.encryption, nonce, &aad, sealed)
        .map_err(|_| ProtocolError::DecryptFailure)?;
    let fields = split_long_fields(&inner)
        .filter(|f| f.len() == 3)
        .ok_or(ProtocolError::Malformed(WireError::BadField("sigma identity")))?;
    let cert = Certificate::from_bytes(&fields[0]).map_err(ProtocolError::CertInvalid)?;
    verify_certificate(suite, &core.env.trust_store, &cert, core.env.now)
        .map_err(ProtocolError::CertInvalid)?;
    if !suite.verify(&cert.signing_public_key, &signed_digest(suite, gx, gy), &fields[1]) {
        return Err(ProtocolError::SignatureMismatch);
    }
    if !ct_eq(&suite.mac(&keys.mac, &fields[0]), &fields[2]) {
        return Err(ProtocolError::MacMismatch);
    }
    core.env.check_attributes(&cert, frame.fingerprint, reading)?;
    Ok(cert)
}
