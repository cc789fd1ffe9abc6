//! State shared by every handshake: identities, the verification
//! environment, abort reasons, and the symmetric data channel.

use std::fmt;
use std::sync::Arc;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{match_with_policy, AttributeField, AttributeSet, Fingerprint, MatchPolicy, SensorReading};
use crate::certificates::{
    verify_certificate, CertError, Certificate, CertificateAuthority, PaddingInvalid, SubjectKeys,
    TrustStore, ValidityWindow,
};
use crate::suite::{CryptoError, CryptoSuite, KeyKind, Keypair, SuiteId, AEAD_NONCE_LEN, SYMMETRIC_KEY_LEN};
use crate::wire::{Frame, Tag, WireError, WireMessage};

pub const SESSION_KEY_LEN: usize = SYMMETRIC_KEY_LEN;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionKey(pub [u8; SESSION_KEY_LEN]);

impl SessionKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        bytes.try_into().ok().map(SessionKey)
    }
}

impl fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionKey({}…)", hex::encode(&self.0[..4]))
    }
}

/// A vehicle as enrolled with a CA: its certificate, long-term keys,
/// true attributes, and the transceiver physically installed in it.
#[derive(Clone, Debug)]
pub struct Identity {
    pub name: String,
    pub certificate: Certificate,
    pub encryption: Keypair,
    pub signing: Keypair,
    pub attributes: AttributeSet,
    pub radio: Fingerprint,
}

impl Identity {
    /// Generates keys for `attributes` and has `ca` certify them.
    pub fn enroll(
        name: impl Into<String>,
        ca: &mut CertificateAuthority,
        attributes: AttributeSet,
        window: ValidityWindow,
        suite: SuiteId,
        rng: &mut dyn RngCore,
    ) -> Result<Identity, CertError> {
        let s = suite.suite();
        let encryption = s.generate_keypair(KeyKind::Encryption, rng);
        let signing = s.generate_keypair(KeyKind::Signing, rng);
        let keys = SubjectKeys {
            encryption: encryption.public().to_vec(),
            signing: signing.public().to_vec(),
        };
        let certificate = ca.issue(attributes.clone(), &keys, window)?;
        Ok(Identity {
            name: name.into(),
            radio: attributes.transceiver_fingerprint,
            certificate,
            encryption,
            signing,
            attributes,
        })
    }

    /// Long-term secrets, as learned by whoever corrupts this vehicle.
    pub fn secret_keys(&self) -> [&[u8]; 2] {
        [self.encryption.secret(), self.signing.secret()]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    /// XOR with a keystream seeded by the session key, plus a MAC tag.
    #[default]
    Keystream,
    Aead,
}

impl DataMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DataMode::Keystream => "keystream",
            DataMode::Aead => "aead",
        }
    }
}

impl std::str::FromStr for DataMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keystream" => Ok(DataMode::Keystream),
            "aead" => Ok(DataMode::Aead),
            _ => Err(format!("unknown data mode `{s}` (expected keystream or aead)")),
        }
    }
}

/// What a vehicle needs to judge a peer.
#[derive(Clone, Debug)]
pub struct SessionEnv {
    pub suite: SuiteId,
    pub trust_store: TrustStore,
    pub now: u64,
    pub policy: MatchPolicy,
    /// Off only for the plain-PKI strawman: no attribute or fingerprint check.
    pub attribute_gate: bool,
    pub data_mode: DataMode,
}

impl SessionEnv {
    pub fn new(suite: SuiteId, trust_store: TrustStore, now: u64) -> Self {
        SessionEnv {
            suite,
            trust_store,
            now,
            policy: MatchPolicy::strict(),
            attribute_gate: true,
            data_mode: DataMode::Keystream,
        }
    }

    pub fn suite(&self) -> &'static dyn CryptoSuite {
        self.suite.suite()
    }

    /// Certificate check followed by the out-of-band attribute and
    /// transceiver checks against the sensed vehicle and the frame.
    pub fn check_peer(
        &self,
        cert: &Certificate,
        frame_fingerprint: Fingerprint,
        reading: &SensorReading,
    ) -> Result<(), ProtocolError> {
        verify_certificate(self.suite(), &self.trust_store, cert, self.now)
            .map_err(ProtocolError::CertInvalid)?;
        self.check_attributes(cert, frame_fingerprint, reading)
    }

    pub fn check_attributes(
        &self,
        cert: &Certificate,
        frame_fingerprint: Fingerprint,
        reading: &SensorReading,
    ) -> Result<(), ProtocolError> {
        if !self.attribute_gate {
            return Ok(());
        }
        let report = match_with_policy(&self.policy, &cert.attributes, reading);
        if !report.overall {
            return Err(ProtocolError::AttributeMismatch(report.mismatched()));
        }
        if frame_fingerprint != cert.attributes.transceiver_fingerprint {
            return Err(ProtocolError::FingerprintMismatch);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Initiator,
    Responder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Start,
    AwaitingM1,
    AwaitingM2,
    /// Responder holds a candidate key and waits for the initiator's
    /// acknowledgment.
    AwaitingAck,
    /// Waiting for the peer's key confirmation (third message or Finish).
    AwaitingConfirmation,
    /// TLS responder between its Hello and the initiator's key exchange.
    AwaitingKeyExchange,
    Established,
    Aborted,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("operation not allowed in phase {0:?}")]
    ProtocolState(Phase),
    #[error("unexpected {0} frame")]
    UnexpectedMessage(Tag),
    #[error("peer certificate rejected: {0}")]
    CertInvalid(CertError),
    #[error("sensed attributes do not match the certificate: {0:?}")]
    AttributeMismatch(Vec<AttributeField>),
    #[error("frame transceiver fingerprint differs from the certified one")]
    FingerprintMismatch,
    #[error("decryption failed")]
    DecryptFailure,
    #[error("padded composition is invalid")]
    PaddingInvalid,
    #[error("sequence number mismatch: expected {expected}, found {found:?}")]
    SequenceMismatch { expected: u64, found: Vec<u8> },
    #[error("signature does not verify")]
    SignatureMismatch,
    #[error("echoed nonce differs from the one sent")]
    NonceMismatch,
    #[error("integrity check failed")]
    IntegrityFailure,
    #[error("acknowledged digest differs from the message sent")]
    DigestMismatch,
    #[error("invalid group element")]
    InvalidGroupElement,
    #[error("MAC does not verify")]
    MacMismatch,
    #[error("no mutually supported version and suite")]
    VersionMismatch,
    #[error("Finish does not match the handshake transcript")]
    FinishMismatch,
    #[error("malformed frame: {0}")]
    Malformed(WireError),
}

/// Field-free discriminant of [`ProtocolError`], for reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AbortKind {
    ProtocolStateError,
    UnexpectedMessage,
    CertInvalid,
    AttributeMismatch,
    FingerprintMismatch,
    DecryptFailure,
    PaddingInvalid,
    SequenceMismatch,
    SignatureMismatch,
    NonceMismatch,
    IntegrityFailure,
    DigestMismatch,
    InvalidGroupElement,
    MacMismatch,
    VersionMismatch,
    FinishMismatch,
    Malformed,
}

impl AbortKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AbortKind::ProtocolStateError => "ProtocolStateError",
            AbortKind::UnexpectedMessage => "UnexpectedMessage",
            AbortKind::CertInvalid => "CertInvalid",
            AbortKind::AttributeMismatch => "AttributeMismatch",
            AbortKind::FingerprintMismatch => "FingerprintMismatch",
            AbortKind::DecryptFailure => "DecryptFailure",
            AbortKind::PaddingInvalid => "PaddingInvalid",
            AbortKind::SequenceMismatch => "SequenceMismatch",
            AbortKind::SignatureMismatch => "SignatureMismatch",
            AbortKind::NonceMismatch => "NonceMismatch",
            AbortKind::IntegrityFailure => "IntegrityFailure",
            AbortKind::DigestMismatch => "DigestMismatch",
            AbortKind::InvalidGroupElement => "InvalidGroupElement",
            AbortKind::MacMismatch => "MacMismatch",
            AbortKind::VersionMismatch => "VersionMismatch",
            AbortKind::FinishMismatch => "FinishMismatch",
            AbortKind::Malformed => "Malformed",
        }
    }
}

impl fmt::Display for AbortKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl ProtocolError {
    pub fn kind(&self) -> AbortKind {
        match self {
            ProtocolError::ProtocolState(_) => AbortKind::ProtocolStateError,
            ProtocolError::UnexpectedMessage(_) => AbortKind::UnexpectedMessage,
            ProtocolError::CertInvalid(_) => AbortKind::CertInvalid,
            ProtocolError::AttributeMismatch(_) => AbortKind::AttributeMismatch,
            ProtocolError::FingerprintMismatch => AbortKind::FingerprintMismatch,
            ProtocolError::DecryptFailure => AbortKind::DecryptFailure,
            ProtocolError::PaddingInvalid => AbortKind::PaddingInvalid,
            ProtocolError::SequenceMismatch { .. } => AbortKind::SequenceMismatch,
            ProtocolError::SignatureMismatch => AbortKind::SignatureMismatch,
            ProtocolError::NonceMismatch => AbortKind::NonceMismatch,
            ProtocolError::IntegrityFailure => AbortKind::IntegrityFailure,
            ProtocolError::DigestMismatch => AbortKind::DigestMismatch,
            ProtocolError::InvalidGroupElement => AbortKind::InvalidGroupElement,
            ProtocolError::MacMismatch => AbortKind::MacMismatch,
            ProtocolError::VersionMismatch => AbortKind::VersionMismatch,
            ProtocolError::FinishMismatch => AbortKind::FinishMismatch,
            ProtocolError::Malformed(_) => AbortKind::Malformed,
        }
    }
}

impl From<PaddingInvalid> for ProtocolError {
    fn from(_: PaddingInvalid) -> Self {
        ProtocolError::PaddingInvalid
    }
}

impl From<CryptoError> for ProtocolError {
    fn from(e: CryptoError) -> Self {
        match e {
            CryptoError::InvalidGroupElement => ProtocolError::InvalidGroupElement,
            _ => ProtocolError::DecryptFailure,
        }
    }
}

/// Channel direction octet: who sealed the frame.
pub const FROM_INITIATOR: u8 = 0;
pub const FROM_RESPONDER: u8 = 1;

const DATA_HEADER_LEN: usize = 9;

fn direction_of(role: Role) -> u8 {
    match role {
        Role::Initiator => FROM_INITIATOR,
        Role::Responder => FROM_RESPONDER,
    }
}

/// Symmetric channel on an established session key. Ciphertext layout:
/// `direction (1) ‖ position (8) ‖ body`. In keystream mode `position` is
/// the offset into the direction's keystream and `body = (plaintext ⊕
/// keystream) ‖ tag`; in AEAD mode it is a frame counter.
#[derive(Clone, Debug)]
pub struct DataChannel {
    suite: SuiteId,
    key: SessionKey,
    mode: DataMode,
    direction: u8,
    position: u64,
}

impl DataChannel {
    pub fn new(suite: SuiteId, key: SessionKey, mode: DataMode, role: Role) -> Self {
        DataChannel {
            suite,
            key,
            mode,
            direction: direction_of(role),
            position: 0,
        }
    }

    /// Keystream seed for one direction: `key ‖ direction`.
    pub fn stream_seed(key: &SessionKey, direction: u8) -> Vec<u8> {
        let mut seed = key.0.to_vec();
        seed.push(direction);
        seed
    }

    pub fn seal(&mut self, plaintext: &[u8]) -> Vec<u8> {
        let out = seal_at(
            self.suite.suite(),
            &self.key,
            self.mode,
            self.direction,
            self.position,
            plaintext,
        );
        self.position += match self.mode {
            DataMode::Keystream => plaintext.len() as u64,
            DataMode::Aead => 1,
        };
        out
    }

    /// Opens a ciphertext sealed by the other end of this session.
    pub fn open(&self, ciphertext: &[u8]) -> Result<Vec<u8>, ProtocolError> {
        open_with_key(
            self.suite.suite(),
            &self.key,
            self.mode,
            Some(1 - self.direction),
            ciphertext,
        )
    }
}

fn mac_input(header: &[u8], body: &[u8]) -> Vec<u8> {
    let mut m = header.to_vec();
    m.extend_from_slice(body);
    m
}

fn aead_nonce(direction: u8, position: u64) -> [u8; AEAD_NONCE_LEN] {
    let mut nonce = [0u8; AEAD_NONCE_LEN];
    nonce[0] = direction;
    nonce[4..].copy_from_slice(&position.to_be_bytes());
    nonce
}

fn seal_at(
    suite: &dyn CryptoSuite,
    key: &SessionKey,
    mode: DataMode,
    direction: u8,
    position: u64,
    plaintext: &[u8],
) -> Vec<u8> {
    let mut header = vec![direction];
    header.extend_from_slice(&position.to_be_bytes());
    let body = match mode {
        DataMode::Keystream => {
            let start = position as usize;
            let stream =
                suite.keystream(&DataChannel::stream_seed(key, direction), start + plaintext.len());
            let mut body: Vec<u8> = plaintext
                .iter()
                .zip(&stream[start..])
                .map(|(p, k)| p ^ k)
                .collect();
            let mac_key = suite.kdf(b"data/mac", &key.0);
            let tag = suite.mac(&mac_key, &mac_input(&header, &body));
            body.extend_from_slice(&tag);
            body
        }
        DataMode::Aead => {
            let aead_key = suite.kdf(b"data/aead", &key.0);
            suite.aead_seal(&aead_key, &aead_nonce(direction, position), &header, plaintext)
        }
    };
    header.extend_from_slice(&body);
    header
}

/// Opens a data-channel ciphertext with an explicit key. `direction`
/// restricts which sender is accepted.
pub fn open_with_key(
    suite: &dyn CryptoSuite,
    key: &SessionKey,
    mode: DataMode,
    direction: Option<u8>,
    ciphertext: &[u8],
) -> Result<Vec<u8>, ProtocolError> {
    if ciphertext.len() < DATA_HEADER_LEN {
        return Err(ProtocolError::IntegrityFailure);
    }
    let (header, body) = ciphertext.split_at(DATA_HEADER_LEN);
    let dir = header[0];
    if dir > FROM_RESPONDER || direction.is_some_and(|d| d != dir) {
        return Err(ProtocolError::IntegrityFailure);
    }
    let position = u64::from_be_bytes(header[1..].try_into().expect("8 octets"));
    match mode {
        DataMode::Keystream => {
            let mac_key = suite.kdf(b"data/mac", &key.0);
            let tag_len = suite.mac(&mac_key, b"").len();
            if body.len() < tag_len {
                return Err(ProtocolError::IntegrityFailure);
            }
            let (masked, tag) = body.split_at(body.len() - tag_len);
            let expected = suite.mac(&mac_key, &mac_input(header, masked));
            if !crate::suite::ct_eq(&expected, tag) {
                return Err(ProtocolError::IntegrityFailure);
            }
            let start = usize::try_from(position).map_err(|_| ProtocolError::IntegrityFailure)?;
            if start > (1 << 24) {
                return Err(ProtocolError::IntegrityFailure);
            }
            let stream =
                suite.keystream(&DataChannel::stream_seed(key, dir), start + masked.len());
            Ok(masked
                .iter()
                .zip(&stream[start..])
                .map(|(c, k)| c ^ k)
                .collect())
        }
        DataMode::Aead => {
            let aead_key = suite.kdf(b"data/aead", &key.0);
            suite
                .aead_open(&aead_key, &aead_nonce(dir, position), header, body)
                .map_err(|_| ProtocolError::IntegrityFailure)
        }
    }
}

/// Common per-session bookkeeping embedded in each protocol's state machine.
#[derive(Clone, Debug)]
pub struct SessionCore {
    pub role: Role,
    pub phase: Phase,
    pub identity: Arc<Identity>,
    pub env: Arc<SessionEnv>,
    pub peer_certificate: Option<Certificate>,
    pub session_key: Option<SessionKey>,
    pub abort_reason: Option<ProtocolError>,
    channel: Option<DataChannel>,
}

impl SessionCore {
    pub fn new(role: Role, phase: Phase, identity: Arc<Identity>, env: Arc<SessionEnv>) -> Self {
        SessionCore {
            role,
            phase,
            identity,
            env,
            peer_certificate: None,
            session_key: None,
            abort_reason: None,
            channel: None,
        }
    }

    pub fn suite(&self) -> &'static dyn CryptoSuite {
        self.env.suite()
    }

    pub fn expect_phase(&self, phase: Phase) -> Result<(), ProtocolError> {
        if self.phase == phase {
            Ok(())
        } else {
            Err(ProtocolError::ProtocolState(self.phase))
        }
    }

    /// Emits `message` stamped with this vehicle's transceiver.
    pub fn frame(&self, message: WireMessage) -> Frame {
        Frame::new(self.identity.radio, message)
    }

    /// Moves to `Aborted`, remembering the first reason.
    pub fn abort(&mut self, err: ProtocolError) -> ProtocolError {
        if self.phase != Phase::Aborted {
            self.phase = Phase::Aborted;
            self.session_key = None;
            self.channel = None;
            self.abort_reason = Some(err.clone());
        }
        err
    }

    pub fn establish(&mut self, key: SessionKey) {
        self.phase = Phase::Established;
        self.session_key = Some(key);
        self.channel = Some(DataChannel::new(
            self.env.suite,
            key,
            self.env.data_mode,
            self.role,
        ));
    }

    /// Runs `step`, aborting the session if it fails.
    pub fn guarded<T>(
        &mut self,
        step: impl FnOnce(&mut Self) -> Result<T, ProtocolError>,
    ) -> Result<T, ProtocolError> {
        match step(self) {
            Ok(v) => Ok(v),
            Err(e) => Err(self.abort(e)),
        }
    }

    pub fn seal(&mut self, plaintext: &[u8]) -> Result<Frame, ProtocolError> {
        self.expect_phase(Phase::Established)?;
        let channel = self.channel.as_mut().expect("established sessions have a channel");
        let ciphertext = channel.seal(plaintext);
        Ok(self.frame(WireMessage::Data { ciphertext }))
    }

    /// Seals into an `Ack` frame instead of `Data`.
    pub fn seal_ack(&mut self, plaintext: &[u8]) -> Result<Frame, ProtocolError> {
        let data = self.seal(plaintext)?;
        let WireMessage::Data { ciphertext } = data.message else {
            unreachable!("seal emits data frames")
        };
        Ok(self.frame(WireMessage::Ack { ciphertext }))
    }

    /// Opening a bad frame does not abort the session.
    pub fn open(&self, frame: &Frame) -> Result<Vec<u8>, ProtocolError> {
        self.expect_phase(Phase::Established)?;
        let WireMessage::Data { ciphertext } = &frame.message else {
            return Err(ProtocolError::UnexpectedMessage(frame.tag()));
        };
        self.channel
            .as_ref()
            .expect("established sessions have a channel")
            .open(ciphertext)
    }
}

/// Big-endian encoding of a certificate sequence number inside compositions.
pub fn sequence_bytes(seq: u64) -> [u8; 8] {
    seq.to_be_bytes()
}

pub(crate) fn check_sequence(expected: u64, found: &[u8]) -> Result<(), ProtocolError> {
    if found == sequence_bytes(expected) {
        Ok(())
    } else {
        Err(ProtocolError::SequenceMismatch {
            expected,
            found: found.to_vec(),
        })
    }
}

pub(crate) fn random_key(rng: &mut dyn RngCore) -> SessionKey {
    let mut k = [0u8; SESSION_KEY_LEN];
    rng.fill_bytes(&mut k);
    SessionKey(k)
}
