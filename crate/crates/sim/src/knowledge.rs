//! Symbolic adversary knowledge and its deductive closure.
//!
//! Every item carries the step that produced it, so the closure can be
//! audited by replaying each step from its inputs.

use std::collections::{HashMap, HashSet};
use std::fmt;

use vauth_core::ake::sigma::{ENCRYPTION_LABEL, INITIATOR_NONCE, MAC_LABEL, RESPONDER_NONCE, SESSION_LABEL};
use vauth_core::ake::tls::{open_finish, MASTER_LABEL, PREMASTER_LEN};
use vauth_core::ake::iso::ISO_KDF_LABEL;
use vauth_core::certificates::{validate_compose3, validate_pad_compose, Certificate};
use vauth_core::codec::split_long_fields;
use vauth_core::hardened::FS_KDF_LABEL;
use vauth_core::session::{open_with_key, DataMode, SessionKey};
use vauth_core::suite::{CryptoSuite, SuiteId, AEAD_NONCE_LEN, SYMMETRIC_KEY_LEN};
use vauth_core::wire::{raw_frame_fields, FieldKind};

pub type ItemId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ItemRole {
    /// A whole encoded frame.
    Frame,
    /// A frame with its fingerprint stripped (what acknowledgments hash).
    Message,
    Field(FieldKind),
    /// Anything recovered by decryption or splitting.
    Plaintext,
    /// A long-term secret handed over by corruption.
    Secret,
    Public,
    Digest,
    /// A Diffie-Hellman shared value.
    Shared,
    /// Output of a key derivation.
    Derived,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitMethod {
    PadCompose,
    Compose3,
    LongFields,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CertPart {
    Attributes,
    EncryptionKey,
    SigningKey,
    CaSignature,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Derivation {
    Observed,
    Given,
    FrameField { frame: ItemId, index: usize },
    Unstamped { frame: ItemId },
    CertField { cert: ItemId, part: CertPart },
    Part { of: ItemId, method: SplitMethod, index: usize },
    PkDecrypt { ciphertext: ItemId, key: ItemId },
    DataOpen { ciphertext: ItemId, key: ItemId, mode: DataMode },
    SigmaOpen { ciphertext: ItemId, key: ItemId, first: ItemId, second: ItemId, from_responder: bool },
    FinishOpen { ciphertext: ItemId, key: ItemId, from_client: bool },
    Hash { of: ItemId },
    DhShared { exponent: ItemId, element: ItemId },
    Kdf { label: &'static str, inputs: Vec<ItemId> },
}

impl Derivation {
    fn parents(&self) -> Vec<ItemId> {
        match self {
            Derivation::Observed | Derivation::Given => vec![],
            Derivation::FrameField { frame, .. } | Derivation::Unstamped { frame } => vec![*frame],
            Derivation::CertField { cert, .. } => vec![*cert],
            Derivation::Part { of, .. } | Derivation::Hash { of } => vec![*of],
            Derivation::PkDecrypt { ciphertext, key }
            | Derivation::DataOpen { ciphertext, key, .. }
            | Derivation::FinishOpen { ciphertext, key, .. } => vec![*ciphertext, *key],
            Derivation::SigmaOpen { ciphertext, key, first, second, .. } => {
                vec![*ciphertext, *key, *first, *second]
            }
            Derivation::DhShared { exponent, element } => vec![*exponent, *element],
            Derivation::Kdf { inputs, .. } => inputs.clone(),
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Item {
    pub bytes: Vec<u8>,
    pub role: ItemRole,
    pub derivation: Derivation,
}

impl fmt::Debug for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Item")
            .field("bytes", &hex::encode(&self.bytes))
            .field("role", &self.role)
            .field("derivation", &self.derivation)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayError {
    pub item: ItemId,
    pub reason: &'static str,
}

impl fmt::Display for ReplayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "item {} does not replay: {}", self.item, self.reason)
    }
}

impl std::error::Error for ReplayError {}

const SHARED_LABELS: [&[u8]; 4] = [ISO_KDF_LABEL, SESSION_LABEL, ENCRYPTION_LABEL, MAC_LABEL];

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Attempt {
    Pk(ItemId, ItemId),
    Sym(ItemId, ItemId),
    Dh(ItemId, ItemId),
    Fs(ItemId, ItemId, ItemId),
    Master(ItemId, ItemId, ItemId),
}

/// The adversary's knowledge set. Only grows.
#[derive(Clone)]
pub struct Knowledge {
    suite: SuiteId,
    items: Vec<Item>,
    index: HashMap<(ItemRole, Vec<u8>), ItemId>,
    by_bytes: HashSet<Vec<u8>>,
    expanded: usize,
    tried: HashSet<Attempt>,
}

impl fmt::Debug for Knowledge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Knowledge")
            .field("suite", &self.suite)
            .field("items", &self.items.len())
            .finish()
    }
}

impl Knowledge {
    pub fn new(suite: SuiteId) -> Self {
        Knowledge {
            suite,
            items: Vec::new(),
            index: HashMap::new(),
            by_bytes: HashSet::new(),
            expanded: 0,
            tried: HashSet::new(),
        }
    }

    fn crypto(&self) -> &'static dyn CryptoSuite {
        self.suite.suite()
    }

    pub fn suite(&self) -> SuiteId {
        self.suite
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, id: ItemId) -> &Item {
        &self.items[id]
    }

    /// Whether these exact octets are known, under any role.
    pub fn contains(&self, bytes: &[u8]) -> bool {
        self.by_bytes.contains(bytes)
    }

    pub fn find(&self, bytes: &[u8]) -> Option<ItemId> {
        self.items.iter().position(|i| i.bytes == bytes)
    }

    fn insert(&mut self, bytes: Vec<u8>, role: ItemRole, derivation: Derivation) -> Option<ItemId> {
        if bytes.is_empty() {
            return None;
        }
        let key = (role, bytes);
        if let Some(&id) = self.index.get(&key) {
            return Some(id);
        }
        let id = self.items.len();
        self.by_bytes.insert(key.1.clone());
        self.items.push(Item {
            bytes: key.1.clone(),
            role,
            derivation,
        });
        self.index.insert(key, id);
        Some(id)
    }

    /// Records an overheard encoded frame.
    pub fn observe_frame(&mut self, encoded: &[u8]) -> Option<ItemId> {
        self.insert(encoded.to_vec(), ItemRole::Frame, Derivation::Observed)
    }

    /// Hands the adversary a long-term secret key.
    pub fn learn_secret(&mut self, secret: &[u8]) -> Option<ItemId> {
        self.insert(secret.to_vec(), ItemRole::Secret, Derivation::Given)
    }

    /// Adds an arbitrary value under an explicit role.
    pub fn learn(&mut self, bytes: &[u8], role: ItemRole) -> Option<ItemId> {
        self.insert(bytes.to_vec(), role, Derivation::Given)
    }

    fn ids_where(&self, pred: impl Fn(&Item) -> bool) -> Vec<ItemId> {
        (0..self.items.len()).filter(|&i| pred(&self.items[i])).collect()
    }

    /// Runs every deduction rule to a fixed point.
    pub fn saturate(&mut self) {
        loop {
            while self.expanded < self.items.len() {
                let id = self.expanded;
                self.expanded += 1;
                self.expand(id);
            }
            let before = self.items.len();
            self.combine();
            if self.items.len() == before {
                break;
            }
        }
    }

    /// Consumes the set and returns its closure.
    pub fn closure(mut self) -> Self {
        self.saturate();
        self
    }

    fn expand(&mut self, id: ItemId) {
        let item = self.items[id].clone();
        match item.role {
            ItemRole::Frame => {
                if let Some((tag, _, fields)) = raw_frame_fields(&item.bytes) {
                    for (index, (kind, bytes)) in tag.schema().iter().zip(fields).enumerate() {
                        self.insert(bytes, ItemRole::Field(*kind), Derivation::FrameField { frame: id, index });
                    }
                    self.insert(unstamp(&item.bytes), ItemRole::Message, Derivation::Unstamped { frame: id });
                }
            }
            ItemRole::Field(FieldKind::Certificate) => self.split_cert(id),
            ItemRole::Plaintext => {
                self.split_cert(id);
                for method in [SplitMethod::PadCompose, SplitMethod::Compose3, SplitMethod::LongFields] {
                    if let Some(parts) = split(method, &item.bytes) {
                        for (index, part) in parts.into_iter().enumerate() {
                            self.insert(part, ItemRole::Plaintext, Derivation::Part { of: id, method, index });
                        }
                    }
                }
            }
            ItemRole::Shared => {
                for label in SHARED_LABELS {
                    let key = self.crypto().kdf(label, &item.bytes);
                    self.insert(
                        key.to_vec(),
                        ItemRole::Derived,
                        Derivation::Kdf { label: label_name(label), inputs: vec![id] },
                    );
                }
            }
            _ => {}
        }
        if !matches!(item.role, ItemRole::Digest) && !matches!(item.derivation, Derivation::Hash { .. }) {
            let digest = self.crypto().hash(&item.bytes).into_bytes();
            self.insert(digest, ItemRole::Digest, Derivation::Hash { of: id });
        }
    }

    fn split_cert(&mut self, id: ItemId) {
        let Some(parts) = cert_parts(&self.items[id].bytes) else {
            return;
        };
        for (part, bytes) in parts {
            self.insert(bytes, ItemRole::Public, Derivation::CertField { cert: id, part });
        }
    }

    fn combine(&mut self) {
        let suite = self.crypto();
        let secret_len = suite.secret_len();
        let element_len = suite.element_len();

        let pk_keys = self.ids_where(|i| {
            i.bytes.len() == secret_len
                && matches!(
                    i.role,
                    ItemRole::Secret | ItemRole::Plaintext | ItemRole::Shared | ItemRole::Derived
                )
        });
        let sym_keys = self.ids_where(|i| {
            i.bytes.len() == SYMMETRIC_KEY_LEN
                && matches!(
                    i.role,
                    ItemRole::Secret | ItemRole::Plaintext | ItemRole::Shared | ItemRole::Derived
                )
        });
        let pk_cts = self.ids_where(|i| i.role == ItemRole::Field(FieldKind::PkCiphertext));
        let sym_cts = self.ids_where(|i| i.role == ItemRole::Field(FieldKind::SymCiphertext));
        let exponents = self.ids_where(|i| i.role == ItemRole::Secret && i.bytes.len() == element_len);
        let wire_elements = self.ids_where(|i| {
            i.role == ItemRole::Field(FieldKind::DhElement) && i.bytes.len() == element_len
        });
        let elements = self.ids_where(|i| {
            i.bytes.len() == element_len
                && match i.role {
                    ItemRole::Field(FieldKind::DhElement) | ItemRole::Field(FieldKind::Nonce) => true,
                    ItemRole::Plaintext => suite.dh_validate(&i.bytes).is_ok(),
                    _ => false,
                }
        });
        let shared = self.ids_where(|i| i.role == ItemRole::Shared);
        let randoms = self.ids_where(|i| i.role == ItemRole::Field(FieldKind::HelloRandom));
        let premasters =
            self.ids_where(|i| i.role == ItemRole::Plaintext && i.bytes.len() == PREMASTER_LEN);

        for &ct in &pk_cts {
            for &key in &pk_keys {
                if !self.tried.insert(Attempt::Pk(ct, key)) {
                    continue;
                }
                if let Ok(pt) = suite.pk_decrypt(&self.items[key].bytes, &self.items[ct].bytes) {
                    self.insert(pt, ItemRole::Plaintext, Derivation::PkDecrypt { ciphertext: ct, key });
                }
            }
        }

        for &ct in &sym_cts {
            for &key in &sym_keys {
                if !self.tried.insert(Attempt::Sym(ct, key)) {
                    continue;
                }
                for (derivation, pt) in self.open_all(ct, key, &wire_elements) {
                    self.insert(pt, ItemRole::Plaintext, derivation);
                }
            }
        }

        for &exponent in &exponents {
            for &element in &elements {
                if !self.tried.insert(Attempt::Dh(exponent, element)) {
                    continue;
                }
                let Ok(own) = suite.dh_from_exponent(&self.items[exponent].bytes) else {
                    continue;
                };
                if let Ok(value) = suite.dh_shared(&own, &self.items[element].bytes) {
                    self.insert(value, ItemRole::Shared, Derivation::DhShared { exponent, element });
                }
            }
        }

        for &s in &shared {
            for &e1 in &elements {
                for &e2 in &elements {
                    if e1 == e2 || !self.tried.insert(Attempt::Fs(s, e1, e2)) {
                        continue;
                    }
                    let input = [&self.items[s].bytes[..], &self.items[e1].bytes, &self.items[e2].bytes].concat();
                    let key = suite.kdf(FS_KDF_LABEL, &input);
                    self.insert(
                        key.to_vec(),
                        ItemRole::Derived,
                        Derivation::Kdf { label: label_name(FS_KDF_LABEL), inputs: vec![s, e1, e2] },
                    );
                }
            }
        }

        for &pm in &premasters {
            for &r1 in &randoms {
                for &r2 in &randoms {
                    if r1 == r2 || !self.tried.insert(Attempt::Master(pm, r1, r2)) {
                        continue;
                    }
                    let input = [&self.items[pm].bytes[..], &self.items[r1].bytes, &self.items[r2].bytes].concat();
                    let key = suite.kdf(MASTER_LABEL, &input);
                    self.insert(
                        key.to_vec(),
                        ItemRole::Derived,
                        Derivation::Kdf { label: label_name(MASTER_LABEL), inputs: vec![pm, r1, r2] },
                    );
                }
            }
        }
    }

    /// Every way a 32-octet key can open a symmetric ciphertext.
    fn open_all(&self, ct: ItemId, key: ItemId, wire_elements: &[ItemId]) -> Vec<(Derivation, Vec<u8>)> {
        let suite = self.crypto();
        let c = &self.items[ct].bytes;
        let k: [u8; SYMMETRIC_KEY_LEN] = self.items[key].bytes[..].try_into().expect("key length filtered");
        let mut out = Vec::new();
        for mode in [DataMode::Keystream, DataMode::Aead] {
            if let Ok(pt) = open_with_key(suite, &SessionKey(k), mode, None, c) {
                out.push((Derivation::DataOpen { ciphertext: ct, key, mode }, pt));
            }
        }
        for &first in wire_elements {
            for &second in wire_elements {
                if first == second {
                    continue;
                }
                let aad = [&self.items[first].bytes[..], &self.items[second].bytes].concat();
                for from_responder in [true, false] {
                    let nonce = sigma_nonce(from_responder);
                    if let Ok(pt) = suite.aead_open(&k, &nonce, &aad, c) {
                        out.push((
                            Derivation::SigmaOpen { ciphertext: ct, key, first, second, from_responder },
                            pt,
                        ));
                    }
                }
            }
        }
        for from_client in [true, false] {
            if let Some(pt) = open_finish(suite, &SessionKey(k), from_client, c) {
                out.push((Derivation::FinishOpen { ciphertext: ct, key, from_client }, pt));
            }
        }
        out
    }

    /// Recomputes item `id` from its recorded inputs.
    pub fn replay(&self, id: ItemId) -> Result<Vec<u8>, ReplayError> {
        let err = |reason| ReplayError { item: id, reason };
        let item = self.items.get(id).ok_or(err("unknown item"))?;
        if item.derivation.parents().iter().any(|&p| p >= id) {
            return Err(err("input recorded after its output"));
        }
        let b = |i: ItemId| &self.items[i].bytes;
        let suite = self.crypto();
        let out = match &item.derivation {
            Derivation::Observed | Derivation::Given => item.bytes.clone(),
            Derivation::FrameField { frame, index } => raw_frame_fields(b(*frame))
                .and_then(|(_, _, mut f)| (*index < f.len()).then(|| f.swap_remove(*index)))
                .ok_or(err("frame does not split"))?,
            Derivation::Unstamped { frame } => unstamp(b(*frame)),
            Derivation::CertField { cert, part } => cert_parts(b(*cert))
                .and_then(|ps| ps.into_iter().find(|(p, _)| p == part).map(|(_, v)| v))
                .ok_or(err("certificate does not parse"))?,
            Derivation::Part { of, method, index } => split(*method, b(*of))
                .and_then(|mut ps| (*index < ps.len()).then(|| ps.swap_remove(*index)))
                .ok_or(err("composition does not split"))?,
            Derivation::PkDecrypt { ciphertext, key } => suite
                .pk_decrypt(b(*key), b(*ciphertext))
                .map_err(|_| err("decryption fails"))?,
            Derivation::DataOpen { ciphertext, key, mode } => {
                let k = SessionKey::from_slice(b(*key)).ok_or(err("key length"))?;
                open_with_key(suite, &k, *mode, None, b(*ciphertext)).map_err(|_| err("open fails"))?
            }
            Derivation::SigmaOpen { ciphertext, key, first, second, from_responder } => {
                let k: [u8; SYMMETRIC_KEY_LEN] = b(*key)[..].try_into().map_err(|_| err("key length"))?;
                let aad = [&b(*first)[..], b(*second)].concat();
                suite
                    .aead_open(&k, &sigma_nonce(*from_responder), &aad, b(*ciphertext))
                    .map_err(|_| err("open fails"))?
            }
            Derivation::FinishOpen { ciphertext, key, from_client } => {
                let k = SessionKey::from_slice(b(*key)).ok_or(err("key length"))?;
                open_finish(suite, &k, *from_client, b(*ciphertext)).ok_or(err("open fails"))?
            }
            Derivation::Hash { of } => suite.hash(b(*of)).into_bytes(),
            Derivation::DhShared { exponent, element } => {
                let own = suite.dh_from_exponent(b(*exponent)).map_err(|_| err("bad exponent"))?;
                suite.dh_shared(&own, b(*element)).map_err(|_| err("bad element"))?
            }
            Derivation::Kdf { label, inputs } => {
                let input: Vec<u8> = inputs.iter().flat_map(|&i| b(i).iter().copied()).collect();
                suite.kdf(label.as_bytes(), &input).to_vec()
            }
        };
        if out == item.bytes {
            Ok(out)
        } else {
            Err(err("recomputed value differs"))
        }
    }

    /// Replays every recorded deduction.
    pub fn verify_log(&self) -> Result<(), ReplayError> {
        (0..self.items.len()).try_for_each(|id| self.replay(id).map(|_| ()))
    }
}

fn unstamp(frame: &[u8]) -> Vec<u8> {
    let mut out = vec![frame[0]];
    out.extend_from_slice(&frame[1 + vauth_core::attributes::FINGERPRINT_LEN..]);
    out
}

fn split(method: SplitMethod, bytes: &[u8]) -> Option<Vec<Vec<u8>>> {
    match method {
        SplitMethod::PadCompose => validate_pad_compose(bytes).ok().map(|(a, b)| vec![a, b]),
        SplitMethod::Compose3 => validate_compose3(bytes).ok().map(|(a, b, c)| vec![a, b, c]),
        SplitMethod::LongFields => split_long_fields(bytes).filter(|f| f.len() >= 2),
    }
}

fn cert_parts(bytes: &[u8]) -> Option<Vec<(CertPart, Vec<u8>)>> {
    let cert = Certificate::from_bytes(bytes).ok()?;
    Some(vec![
        (CertPart::Attributes, cert.attributes.canonical_encode().ok()?),
        (CertPart::EncryptionKey, cert.public_key),
        (CertPart::SigningKey, cert.signing_public_key),
        (CertPart::CaSignature, cert.ca_signature.into_bytes()),
    ])
}

fn sigma_nonce(from_responder: bool) -> [u8; AEAD_NONCE_LEN] {
    if from_responder {
        RESPONDER_NONCE
    } else {
        INITIATOR_NONCE
    }
}

fn label_name(label: &'static [u8]) -> &'static str {
    std::str::from_utf8(label).expect("labels are ascii")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha20Rng;
    use rand_core::SeedableRng;
    use vauth_core::suite::KeyKind;

    #[test]
    fn decrypts_with_held_key() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let s = SuiteId::Standard.suite();
        let kp = s.generate_keypair(KeyKind::Encryption, &mut rng);
        let ct = s.pk_encrypt(kp.public(), b"attack at dawn", &mut rng).unwrap();
        let mut k = Knowledge::new(SuiteId::Standard);
        k.learn(&ct, ItemRole::Field(FieldKind::PkCiphertext));
        k.learn_secret(kp.secret());
        let k = k.closure();
        assert!(k.contains(b"attack at dawn"));
        k.verify_log().unwrap();
    }

    #[test]
    fn ciphertext_alone_reveals_nothing() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let s = SuiteId::Standard.suite();
        let kp = s.generate_keypair(KeyKind::Encryption, &mut rng);
        let ct = s.pk_encrypt(kp.public(), b"attack at dawn", &mut rng).unwrap();
        let mut k = Knowledge::new(SuiteId::Standard);
        k.learn(&ct, ItemRole::Field(FieldKind::PkCiphertext));
        let k = k.closure();
        assert!(!k.contains(b"attack at dawn"));
    }

    #[test]
    fn dh_and_kdf_rules_fire() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let s = SuiteId::Standard.suite();
        let a = s.dh_keygen(&mut rng);
        let b = s.dh_keygen(&mut rng);
        let shared = s.dh_shared(&a, b.value()).unwrap();
        let mut k = Knowledge::new(SuiteId::Standard);
        k.learn_secret(a.exponent().unwrap());
        k.learn(b.value(), ItemRole::Field(FieldKind::DhElement));
        let k = k.closure();
        assert!(k.contains(&shared));
        assert!(k.contains(&s.kdf(ISO_KDF_LABEL, &shared)));
        k.verify_log().unwrap();
    }

    #[test]
    fn tampered_log_is_detected() {
        let mut k = Knowledge::new(SuiteId::Standard);
        k.learn(b"abc", ItemRole::Public);
        let mut k = k.closure();
        let id = k.items.iter().position(|i| i.role == ItemRole::Digest).unwrap();
        k.items[id].bytes[0] ^= 1;
        assert_eq!(k.replay(id).unwrap_err().reason, "recomputed value differs");
    }
}
