//! Two-round session-key establishment.
//!
//! ```text
//! S → R : M1 = Cert_S
//! R → S : M2 = Cert_R, E_PK_S(key_r + seq_S), E_PK_S(Sig_R(H(key_r + seq_S)))
//! ```
//!
//! `+` is the zero-padded composition from [`crate::certificates::pad_compose`].
//! Nothing binds M2 to a particular session of S; see
//! [`crate::hardened`] for the nonce-bound variant.

use std::sync::Arc;

use rand_core::RngCore;

use crate::attributes::SensorReading;
use crate::certificates::{pad_compose, validate_pad_compose, Certificate};
use crate::session::{
    check_sequence, random_key, sequence_bytes, Identity, Phase, ProtocolError, Role,
    SessionCore, SessionEnv, SessionKey, SESSION_KEY_LEN,
};
use crate::wire::{Frame, WireMessage};

#[derive(Clone, Debug)]
pub struct BaseSession {
    core: SessionCore,
}

impl BaseSession {
    pub fn initiator(identity: Arc<Identity>, env: Arc<SessionEnv>) -> Self {
        BaseSession {
            core: SessionCore::new(Role::Initiator, Phase::Start, identity, env),
        }
    }

    pub fn responder(identity: Arc<Identity>, env: Arc<SessionEnv>) -> Self {
        BaseSession {
            core: SessionCore::new(Role::Responder, Phase::AwaitingM1, identity, env),
        }
    }

    pub fn core(&self) -> &SessionCore {
        &self.core
    }

    pub fn core_mut(&mut self) -> &mut SessionCore {
        &mut self.core
    }

    pub fn phase(&self) -> Phase {
        self.core.phase
    }

    pub fn session_key(&self) -> Option<SessionKey> {
        self.core.session_key
    }

    /// Step 1: send our certificate.
    pub fn initiator_start(&mut self) -> Result<Frame, ProtocolError> {
        self.core.expect_phase(Phase::Start)?;
        let cert = self.core.identity.certificate.clone();
        self.core.phase = Phase::AwaitingM2;
        Ok(self.core.frame(WireMessage::M1 { cert }))
    }

    /// Step 2: check S's certificate against the CA and the sensed
    /// vehicle, then answer with a fresh `key_r` for S.
    pub fn responder_on_m1(
        &mut self,
        m1: &Frame,
        reading: &SensorReading,
        rng: &mut dyn RngCore,
    ) -> Result<Frame, ProtocolError> {
        self.core.expect_phase(Phase::AwaitingM1)?;
        self.core.guarded(|core| {
            let WireMessage::M1 { cert } = &m1.message else {
                return Err(ProtocolError::UnexpectedMessage(m1.tag()));
            };
            core.env.check_peer(cert, m1.fingerprint, reading)?;
            let key = random_key(rng);
            let message = build_m2(core, cert, &key, rng)?;
            core.peer_certificate = Some(cert.clone());
            core.establish(key);
            Ok(core.frame(message))
        })
    }

    /// Step 3: check R, recover `key_r`, and accept it only if the
    /// composition is well formed, names our sequence number, and carries
    /// R's signature.
    pub fn initiator_on_m2(
        &mut self,
        m2: &Frame,
        reading: &SensorReading,
    ) -> Result<(), ProtocolError> {
        self.core.expect_phase(Phase::AwaitingM2)?;
        self.core.guarded(|core| {
            let WireMessage::M2 {
                cert,
                enc_key_blob,
                enc_sig_blob,
            } = &m2.message
            else {
                return Err(ProtocolError::UnexpectedMessage(m2.tag()));
            };
            core.env.check_peer(cert, m2.fingerprint, reading)?;
            let key = open_m2(core, cert, enc_key_blob, enc_sig_blob)?;
            core.peer_certificate = Some(cert.clone());
            core.establish(key);
            Ok(())
        })
    }

    pub fn seal(&mut self, plaintext: &[u8]) -> Result<Frame, ProtocolError> {
        self.core.seal(plaintext)
    }

    pub fn open(&self, frame: &Frame) -> Result<Vec<u8>, ProtocolError> {
        self.core.open(frame)
    }
}

fn build_m2(
    core: &SessionCore,
    peer: &Certificate,
    key: &SessionKey,
    rng: &mut dyn RngCore,
) -> Result<WireMessage, ProtocolError> {
    let suite = core.suite();
    let composition = pad_compose(key.as_bytes(), &sequence_bytes(peer.sequence_number));
    let enc_key_blob = suite.pk_encrypt(&peer.public_key, &composition, rng)?;
    let signature = suite.sign(core.identity.signing.secret(), &suite.hash(&composition))?;
    let enc_sig_blob = suite.pk_encrypt(&peer.public_key, signature.as_bytes(), rng)?;
    Ok(WireMessage::M2 {
        cert: core.identity.certificate.clone(),
        enc_key_blob,
        enc_sig_blob,
    })
}

fn open_m2(
    core: &SessionCore,
    peer: &Certificate,
    enc_key_blob: &[u8],
    enc_sig_blob: &[u8],
) -> Result<SessionKey, ProtocolError> {
    let suite = core.suite();
    let own = &core.identity;
    let composition = suite.pk_decrypt(own.encryption.secret(), enc_key_blob)?;
    let (key, seq) = validate_pad_compose(&composition)?;
    if key.len() != SESSION_KEY_LEN {
        return Err(ProtocolError::PaddingInvalid);
    }
    check_sequence(own.certificate.sequence_number, &seq)?;
    let signature = suite.pk_decrypt(own.encryption.secret(), enc_sig_blob)?;
    let digest = suite.hash(&pad_compose(&key, &seq));
    if !suite.verify(&peer.signing_public_key, &digest, &signature) {
        return Err(ProtocolError::SignatureMismatch);
    }
    Ok(SessionKey::from_slice(&key).expect("length checked"))
}
