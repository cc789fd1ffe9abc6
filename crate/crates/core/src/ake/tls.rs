//! Mutually authenticated TLS-style handshake with RSA-style key transport.
//!
//! ```text
//! S → R : ClientHello{version, suites, random_c}
//! R → S : ServerHello{version, suite, random_s, Cert_R, request_cert}
//! S → R : KeyExchange{E_PK_R(premaster), Cert_S}
//! S → R : Finished_S
//! R → S : Finished_R
//! ```
//!
//! Each Finished is an AEAD seal of the transcript hash so far. A tampered
//! hello leaves the two transcripts different, and the first Finished
//! fails.

use std::sync::Arc;

use rand_core::RngCore;

use crate::attributes::SensorReading;
use crate::session::{
    Identity, Phase, ProtocolError, Role, SessionCore, SessionEnv, SessionKey,
};
use crate::suite::{CryptoSuite, AEAD_NONCE_LEN, SYMMETRIC_KEY_LEN};
use crate::wire::{Frame, WireMessage};

pub const TLS_VERSION: u16 = 0x0303;
pub const RANDOM_LEN: usize = 32;
pub const PREMASTER_LEN: usize = 32;
pub const MASTER_LABEL: &[u8] = b"tls/master";
pub const FINISH_LABEL: &[u8] = b"tls/finish";

const CLIENT_FINISH_NONCE: [u8; AEAD_NONCE_LEN] = [0x10, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0];
const SERVER_FINISH_NONCE: [u8; AEAD_NONCE_LEN] = [0x11, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0];

/// `kdf(premaster ‖ client_random ‖ server_random)`.
pub fn master_key(
    suite: &dyn CryptoSuite,
    premaster: &[u8],
    client_random: &[u8],
    server_random: &[u8],
) -> SessionKey {
    let input = [premaster, client_random, server_random].concat();
    SessionKey(suite.kdf(MASTER_LABEL, &input))
}

/// Running hash input: the fingerprint-free encodings of every handshake
/// message, each length-prefixed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    messages: Vec<Vec<u8>>,
}

impl Transcript {
    pub fn push(&mut self, message: &WireMessage) {
        self.messages.push(message.encode());
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    pub fn digest(&self, suite: &dyn CryptoSuite) -> Vec<u8> {
        suite
            .hash(&crate::codec::join_long_fields(&self.messages))
            .into_bytes()
    }
}

/// Seals a Finished over `transcript_hash`. `from_client` picks the nonce.
pub fn seal_finish(
    suite: &dyn CryptoSuite,
    master: &SessionKey,
    from_client: bool,
    transcript_hash: &[u8],
) -> Vec<u8> {
    let key = suite.kdf(FINISH_LABEL, master.as_bytes());
    suite.aead_seal(&key, finish_nonce(from_client), &[], transcript_hash)
}

pub fn open_finish(
    suite: &dyn CryptoSuite,
    master: &SessionKey,
    from_client: bool,
    sealed: &[u8],
) -> Option<Vec<u8>> {
    let key: [u8; SYMMETRIC_KEY_LEN] = suite.kdf(FINISH_LABEL, master.as_bytes());
    suite.aead_open(&key, finish_nonce(from_client), &[], sealed).ok()
}

fn finish_nonce(from_client: bool) -> &'static [u8; AEAD_NONCE_LEN] {
    if from_client {
        &CLIENT_FINISH_NONCE
    } else {
        &SERVER_FINISH_NONCE
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TlsConfig {
    pub version: u16,
    /// Offered (client) or accepted (server) suite names, in preference
    /// order.
    pub suites: Vec<String>,
}

impl TlsConfig {
    pub fn for_env(env: &SessionEnv) -> Self {
        TlsConfig {
            version: TLS_VERSION,
            suites: vec![env.suite.as_str().to_string()],
        }
    }
}

#[derive(Clone, Debug)]
pub struct TlsSession {
    core: SessionCore,
    cfg: TlsConfig,
    transcript: Transcript,
    client_random: Vec<u8>,
    server_random: Vec<u8>,
    pending: Option<SessionKey>,
    negotiated: Option<String>,
}

impl TlsSession {
    pub fn initiator(identity: Arc<Identity>, env: Arc<SessionEnv>) -> Self {
        let cfg = TlsConfig::for_env(&env);
        Self::with_config(Role::Initiator, identity, env, cfg)
    }

    pub fn responder(identity: Arc<Identity>, env: Arc<SessionEnv>) -> Self {
        let cfg = TlsConfig::for_env(&env);
        Self::with_config(Role::Responder, identity, env, cfg)
    }

    pub fn with_config(
        role: Role,
        identity: Arc<Identity>,
        env: Arc<SessionEnv>,
        cfg: TlsConfig,
    ) -> Self {
        let phase = match role {
            Role::Initiator => Phase::Start,
            Role::Responder => Phase::AwaitingM1,
        };
        TlsSession {
            core: SessionCore::new(role, phase, identity, env),
            cfg,
            transcript: Transcript::default(),
            client_random: Vec::new(),
            server_random: Vec::new(),
            pending: None,
            negotiated: None,
        }
    }

    pub fn core(&self) -> &SessionCore {
        &self.core
    }

    pub fn core_mut(&mut self) -> &mut SessionCore {
        &mut self.core
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn negotiated_suite(&self) -> Option<&str> {
        self.negotiated.as_deref()
    }

    /// Advances the handshake; the client emits KeyExchange and Finished
    /// together.
    pub fn tls_step(
        &mut self,
        incoming: Option<&Frame>,
        reading: &SensorReading,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Frame>, ProtocolError> {
        match (self.core.role, self.core.phase, incoming) {
            (Role::Initiator, Phase::Start, None) => Ok(vec![self.client_hello(rng)]),
            (Role::Initiator, Phase::AwaitingM2, Some(f)) => self.on_server_hello(f, reading, rng),
            (Role::Initiator, Phase::AwaitingConfirmation, Some(f)) => {
                self.on_server_finish(f).map(|()| Vec::new())
            }
            (Role::Responder, Phase::AwaitingM1, Some(f)) => {
                self.on_client_hello(f, rng).map(|f| vec![f])
            }
            (Role::Responder, Phase::AwaitingKeyExchange, Some(f)) => {
                self.on_key_exchange(f, reading).map(|()| Vec::new())
            }
            (Role::Responder, Phase::AwaitingConfirmation, Some(f)) => {
                self.on_client_finish(f).map(|f| vec![f])
            }
            (_, phase, _) => Err(ProtocolError::ProtocolState(phase)),
        }
    }

    fn client_hello(&mut self, rng: &mut dyn RngCore) -> Frame {
        self.client_random = random_bytes(rng, RANDOM_LEN);
        let message = WireMessage::TlsClientHello {
            version: self.cfg.version,
            suites: self.cfg.suites.clone(),
            random: self.client_random.clone(),
        };
        self.transcript.push(&message);
        self.core.phase = Phase::AwaitingM2;
        self.core.frame(message)
    }

    fn on_client_hello(
        &mut self,
        frame: &Frame,
        rng: &mut dyn RngCore,
    ) -> Result<Frame, ProtocolError> {
        let cfg = self.cfg.clone();
        let server_random = random_bytes(rng, RANDOM_LEN);
        let (reply, chosen, client_random) = self.core.guarded(|core| {
            let WireMessage::TlsClientHello {
                version,
                suites,
                random,
            } = &frame.message
            else {
                return Err(ProtocolError::UnexpectedMessage(frame.tag()));
            };
            if *version != cfg.version || random.len() != RANDOM_LEN {
                return Err(ProtocolError::VersionMismatch);
            }
            let chosen = suites
                .iter()
                .find(|s| cfg.suites.contains(s))
                .cloned()
                .ok_or(ProtocolError::VersionMismatch)?;
            let reply = WireMessage::TlsServerHello {
                version: cfg.version,
                suites: vec![chosen.clone()],
                random: server_random.clone(),
                cert: core.identity.certificate.clone(),
                request_cert: true,
            };
            core.phase = Phase::AwaitingKeyExchange;
            Ok((reply, chosen, random.clone()))
        })?;
        self.transcript.push(&frame.message);
        self.transcript.push(&reply);
        self.client_random = client_random;
        self.server_random = server_random;
        self.negotiated = Some(chosen);
        Ok(self.core.frame(reply))
    }

    fn on_server_hello(
        &mut self,
        frame: &Frame,
        reading: &SensorReading,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Frame>, ProtocolError> {
        let cfg = self.cfg.clone();
        let client_random = self.client_random.clone();
        let mut transcript = self.transcript.clone();
        let (frames, key, chosen, server_random) = self.core.guarded(|core| {
            let WireMessage::TlsServerHello {
                version,
                suites,
                random,
                cert,
                ..
            } = &frame.message
            else {
                return Err(ProtocolError::UnexpectedMessage(frame.tag()));
            };
            if *version != cfg.version || random.len() != RANDOM_LEN {
                return Err(ProtocolError::VersionMismatch);
            }
            let chosen = match suites.as_slice() {
                [one] if cfg.suites.contains(one) => one.clone(),
                _ => return Err(ProtocolError::VersionMismatch),
            };
            core.env.check_peer(cert, frame.fingerprint, reading)?;
            transcript.push(&frame.message);
            let suite = core.suite();
            let premaster = random_bytes(rng, PREMASTER_LEN);
            let enc_premaster = suite.pk_encrypt(&cert.public_key, &premaster, rng)?;
            let master = master_key(suite, &premaster, &client_random, random);
            let kex = WireMessage::TlsKeyExchange {
                enc_premaster,
                cert: core.identity.certificate.clone(),
            };
            transcript.push(&kex);
            let finish = WireMessage::TlsFinished {
                sealed: seal_finish(suite, &master, true, &transcript.digest(suite)),
            };
            transcript.push(&finish);
            core.peer_certificate = Some(cert.clone());
            core.phase = Phase::AwaitingConfirmation;
            let frames = vec![core.frame(kex), core.frame(finish)];
            Ok((frames, master, chosen, random.clone()))
        })?;
        self.transcript = transcript;
        self.pending = Some(key);
        self.negotiated = Some(chosen);
        self.server_random = server_random;
        Ok(frames)
    }

    fn on_key_exchange(&mut self, frame: &Frame, reading: &SensorReading) -> Result<(), ProtocolError> {
        let client_random = self.client_random.clone();
        let server_random = self.server_random.clone();
        let master = self.core.guarded(|core| {
            let WireMessage::TlsKeyExchange {
                enc_premaster,
                cert,
            } = &frame.message
            else {
                return Err(ProtocolError::UnexpectedMessage(frame.tag()));
            };
            core.env.check_peer(cert, frame.fingerprint, reading)?;
            let suite = core.suite();
            let premaster = suite.pk_decrypt(core.identity.encryption.secret(), enc_premaster)?;
            if premaster.len() != PREMASTER_LEN {
                return Err(ProtocolError::DecryptFailure);
            }
            core.peer_certificate = Some(cert.clone());
            core.phase = Phase::AwaitingConfirmation;
            Ok(master_key(suite, &premaster, &client_random, &server_random))
        })?;
        self.transcript.push(&frame.message);
        self.pending = Some(master);
        Ok(())
    }

    fn on_client_finish(&mut self, frame: &Frame) -> Result<Frame, ProtocolError> {
        let master = self.pending.expect("set with KeyExchange");
        let mut transcript = self.transcript.clone();
        let reply = self.core.guarded(|core| {
            let WireMessage::TlsFinished { sealed } = &frame.message else {
                return Err(ProtocolError::UnexpectedMessage(frame.tag()));
            };
            let suite = core.suite();
            let claimed =
                open_finish(suite, &master, true, sealed).ok_or(ProtocolError::FinishMismatch)?;
            if claimed != transcript.digest(suite) {
                return Err(ProtocolError::FinishMismatch);
            }
            transcript.push(&frame.message);
            let reply = WireMessage::TlsFinished {
                sealed: seal_finish(suite, &master, false, &transcript.digest(suite)),
            };
            core.establish(master);
            Ok(core.frame(reply))
        })?;
        transcript.push(&reply.message);
        self.transcript = transcript;
        self.pending = None;
        Ok(reply)
    }

    fn on_server_finish(&mut self, frame: &Frame) -> Result<(), ProtocolError> {
        let master = self.pending.expect("set with ServerHello");
        let transcript = self.transcript.clone();
        self.core.guarded(|core| {
            let WireMessage::TlsFinished { sealed } = &frame.message else {
                return Err(ProtocolError::UnexpectedMessage(frame.tag()));
            };
            let suite = core.suite();
            let claimed =
                open_finish(suite, &master, false, sealed).ok_or(ProtocolError::FinishMismatch)?;
            if claimed != transcript.digest(suite) {
                return Err(ProtocolError::FinishMismatch);
            }
            core.establish(master);
            Ok(())
        })?;
        self.transcript.push(&frame.message);
        self.pending = None;
        Ok(())
    }
}

fn random_bytes(rng: &mut dyn RngCore, len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    rng.fill_bytes(&mut out);
    out
}
