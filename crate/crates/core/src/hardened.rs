//! Nonce-bound, acknowledged variants of the two-round protocol.
//!
//! * `nonce_ack`: S adds a fresh nonce to M1, R echoes it inside both
//!   cryptograms, and S acknowledges M2 on the new channel before R treats
//!   the session as established.
//! * `fs_dh`: the nonce is `g^α` and R's key slot carries `g^β`; the session
//!   key is `kdf(g^αβ ‖ g^α ‖ g^β)` and both exponents are erased.

use std::sync::Arc;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::attributes::SensorReading;
use crate::certificates::{compose3, validate_compose3};
use crate::session::{
    check_sequence, open_with_key, random_key, sequence_bytes, Identity, Phase, ProtocolError,
    Role, SessionCore, SessionEnv, SessionKey, FROM_INITIATOR, SESSION_KEY_LEN,
};
use crate::suite::{CryptoSuite, DhElement, Digest};
use crate::wire::{Frame, WireError, WireMessage};

pub const NONCE_LEN: usize = 16;
pub const FS_KDF_LABEL: &[u8] = b"vanet-fs-v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HardenedMode {
    NonceAck,
    FsDh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HardenedConfig {
    pub mode: HardenedMode,
}

/// `kdf(g^αβ ‖ g^α ‖ g^β)` under the forward-secrecy label.
pub fn fs_session_key(
    suite: &dyn CryptoSuite,
    shared: &[u8],
    initiator_element: &[u8],
    responder_element: &[u8],
) -> SessionKey {
    let mut input = shared.to_vec();
    input.extend_from_slice(initiator_element);
    input.extend_from_slice(responder_element);
    SessionKey(suite.kdf(FS_KDF_LABEL, &input))
}

/// Digest the acknowledgment covers: the M2h message without its radio
/// fingerprint.
pub fn ack_digest(suite: &dyn CryptoSuite, m2h: &WireMessage) -> Digest {
    suite.hash(&m2h.encode())
}

#[derive(Clone, Debug)]
pub struct HardenedSession {
    core: SessionCore,
    cfg: HardenedConfig,
    nonce: Option<Vec<u8>>,
    ephemeral: Option<DhElement>,
    candidate: Option<SessionKey>,
    sent_m2_digest: Option<Digest>,
}

impl HardenedSession {
    pub fn initiator(identity: Arc<Identity>, env: Arc<SessionEnv>, cfg: HardenedConfig) -> Self {
        Self::new(Role::Initiator, Phase::Start, identity, env, cfg)
    }

    pub fn responder(identity: Arc<Identity>, env: Arc<SessionEnv>, cfg: HardenedConfig) -> Self {
        Self::new(Role::Responder, Phase::AwaitingM1, identity, env, cfg)
    }

    fn new(
        role: Role,
        phase: Phase,
        identity: Arc<Identity>,
        env: Arc<SessionEnv>,
        cfg: HardenedConfig,
    ) -> Self {
        HardenedSession {
            core: SessionCore::new(role, phase, identity, env),
            cfg,
            nonce: None,
            ephemeral: None,
            candidate: None,
            sent_m2_digest: None,
        }
    }

    pub fn config(&self) -> HardenedConfig {
        self.cfg
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

    /// The nonce sent (initiator) or received (responder) in this session.
    pub fn nonce(&self) -> Option<&[u8]> {
        self.nonce.as_deref()
    }

    /// Whether an ephemeral exponent is still held.
    pub fn holds_exponent(&self) -> bool {
        self.ephemeral.as_ref().is_some_and(|e| e.exponent().is_some())
    }

    /// M1h = Cert_S ‖ Nonce_S.
    pub fn h_initiator_start(&mut self, rng: &mut dyn RngCore) -> Result<Frame, ProtocolError> {
        self.core.expect_phase(Phase::Start)?;
        let nonce = match self.cfg.mode {
            HardenedMode::NonceAck => {
                let mut n = vec![0u8; NONCE_LEN];
                rng.fill_bytes(&mut n);
                n
            }
            HardenedMode::FsDh => {
                let alpha = self.core.suite().dh_keygen(rng);
                let value = alpha.value().to_vec();
                self.ephemeral = Some(alpha);
                value
            }
        };
        self.nonce = Some(nonce.clone());
        self.core.phase = Phase::AwaitingM2;
        Ok(self.core.frame(WireMessage::M1h {
            cert: self.core.identity.certificate.clone(),
            nonce,
        }))
    }

    pub fn h_responder_on_m1(
        &mut self,
        m1h: &Frame,
        reading: &SensorReading,
        rng: &mut dyn RngCore,
    ) -> Result<Frame, ProtocolError> {
        self.core.expect_phase(Phase::AwaitingM1)?;
        let mode = self.cfg.mode;
        let mut step = |core: &mut SessionCore| {
            let WireMessage::M1h { cert, nonce } = &m1h.message else {
                return Err(ProtocolError::UnexpectedMessage(m1h.tag()));
            };
            core.env.check_peer(cert, m1h.fingerprint, reading)?;
            let suite = core.suite();
            let (slot, key) = match mode {
                HardenedMode::NonceAck => {
                    if nonce.len() != NONCE_LEN {
                        return Err(ProtocolError::Malformed(WireError::BadField("nonce")));
                    }
                    let key = random_key(rng);
                    (key.0.to_vec(), key)
                }
                HardenedMode::FsDh => {
                    suite.dh_validate(nonce)?;
                    let beta = suite.dh_keygen(rng);
                    let shared = suite.dh_shared(&beta, nonce)?;
                    let key = fs_session_key(suite, &shared, nonce, beta.value());
                    (beta.value().to_vec(), key)
                }
            };
            let payload = compose3(&slot, &sequence_bytes(cert.sequence_number), nonce);
            let enc_key_blob = suite.pk_encrypt(&cert.public_key, &payload, rng)?;
            let signature = suite.sign(core.identity.signing.secret(), &suite.hash(&payload))?;
            let enc_sig_blob = suite.pk_encrypt(&cert.public_key, signature.as_bytes(), rng)?;
            let message = WireMessage::M2h {
                cert: core.identity.certificate.clone(),
                enc_key_blob,
                enc_sig_blob,
            };
            let digest = ack_digest(suite, &message);
            core.peer_certificate = Some(cert.clone());
            core.phase = Phase::AwaitingAck;
            Ok((core.frame(message), key, digest, nonce.clone()))
        };
        let (frame, key, digest, nonce) = self.core.guarded(&mut step)?;
        self.candidate = Some(key);
        self.sent_m2_digest = Some(digest);
        self.nonce = Some(nonce);
        Ok(frame)
    }

    /// Verifies M2h, establishes, and returns the acknowledgment frame.
    pub fn h_initiator_on_m2(
        &mut self,
        m2h: &Frame,
        reading: &SensorReading,
    ) -> Result<Frame, ProtocolError> {
        self.core.expect_phase(Phase::AwaitingM2)?;
        let mode = self.cfg.mode;
        let sent_nonce = self.nonce.clone().expect("nonce set at start");
        let mut ephemeral = self.ephemeral.take();
        let result = self.core.guarded(|core| {
            let WireMessage::M2h {
                cert,
                enc_key_blob,
                enc_sig_blob,
            } = &m2h.message
            else {
                return Err(ProtocolError::UnexpectedMessage(m2h.tag()));
            };
            core.env.check_peer(cert, m2h.fingerprint, reading)?;
            let suite = core.suite();
            let own = &core.identity;
            let payload = suite.pk_decrypt(own.encryption.secret(), enc_key_blob)?;
            let (slot, seq, echoed) = validate_compose3(&payload)?;
            check_sequence(own.certificate.sequence_number, &seq)?;
            if echoed != sent_nonce {
                return Err(ProtocolError::NonceMismatch);
            }
            let signature = suite.pk_decrypt(own.encryption.secret(), enc_sig_blob)?;
            let digest = suite.hash(&compose3(&slot, &seq, &echoed));
            if !suite.verify(&cert.signing_public_key, &digest, &signature) {
                return Err(ProtocolError::SignatureMismatch);
            }
            let key = match mode {
                HardenedMode::NonceAck => {
                    if slot.len() != SESSION_KEY_LEN {
                        return Err(ProtocolError::PaddingInvalid);
                    }
                    SessionKey::from_slice(&slot).expect("length checked")
                }
                HardenedMode::FsDh => {
                    let alpha = ephemeral.as_ref().expect("fs_dh initiator holds alpha");
                    let shared = suite.dh_shared(alpha, &slot)?;
                    fs_session_key(suite, &shared, &sent_nonce, &slot)
                }
            };
            core.peer_certificate = Some(cert.clone());
            core.establish(key);
            core.seal_ack(ack_digest(suite, &m2h.message).as_bytes())
        });
        // the exponent is erased whether or not the session succeeded
        if let Some(e) = ephemeral.as_mut() {
            e.forget_exponent();
        }
        self.ephemeral = ephemeral;
        result
    }

    /// R becomes established only once S proves it derived the same key
    /// from the M2h that R actually sent.
    pub fn h_responder_on_ack(&mut self, ack: &Frame) -> Result<(), ProtocolError> {
        self.core.expect_phase(Phase::AwaitingAck)?;
        let candidate = self.candidate.expect("candidate key set with M2h");
        let expected = self.sent_m2_digest.clone().expect("digest set with M2h");
        self.core.guarded(|core| {
            let WireMessage::Ack { ciphertext } = &ack.message else {
                return Err(ProtocolError::UnexpectedMessage(ack.tag()));
            };
            let digest = open_with_key(
                core.suite(),
                &candidate,
                core.env.data_mode,
                Some(FROM_INITIATOR),
                ciphertext,
            )?;
            if digest != expected.as_bytes() {
                return Err(ProtocolError::DigestMismatch);
            }
            core.establish(candidate);
            Ok(())
        })?;
        self.candidate = None;
        Ok(())
    }

    pub fn seal(&mut self, plaintext: &[u8]) -> Result<Frame, ProtocolError> {
        self.core.seal(plaintext)
    }

    pub fn open(&self, frame: &Frame) -> Result<Vec<u8>, ProtocolError> {
        self.core.open(frame)
    }
}
