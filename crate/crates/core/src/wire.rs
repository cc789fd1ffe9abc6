//! On-air frames. Layout: `tag (1) ‖ emitter fingerprint (8) ‖ fields`,
//! each field a u32 big-endian length followed by its octets, in the
//! declared order of the variant.

use std::fmt;

use thiserror::Error;

use crate::attributes::{Fingerprint, FINGERPRINT_LEN};
use crate::certificates::{CertError, Certificate};
use crate::codec::{join_long_fields, split_long_fields, DecodeError, Reader};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("unknown frame tag 0x{0:02x}")]
    UnknownTag(u8),
    #[error("frame {tag} expects {expected} fields, found {found}")]
    FieldCount {
        tag: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("bad field `{0}`")]
    BadField(&'static str),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("embedded certificate: {0}")]
    Certificate(#[from] CertError),
}

/// What a frame field carries; drives the adversary's message splitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldKind {
    Certificate,
    PkCiphertext,
    SymCiphertext,
    DhElement,
    Nonce,
    Signature,
    HelloRandom,
    Version,
    SuiteList,
    Flag,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WireMessage {
    M1 {
        cert: Certificate,
    },
    M2 {
        cert: Certificate,
        enc_key_blob: Vec<u8>,
        enc_sig_blob: Vec<u8>,
    },
    Ack {
        ciphertext: Vec<u8>,
    },
    Data {
        ciphertext: Vec<u8>,
    },
    M1h {
        cert: Certificate,
        nonce: Vec<u8>,
    },
    M2h {
        cert: Certificate,
        enc_key_blob: Vec<u8>,
        enc_sig_blob: Vec<u8>,
    },
    IsoKe1 {
        cert: Certificate,
        dh: Vec<u8>,
    },
    IsoKe2 {
        cert: Certificate,
        dh: Vec<u8>,
        signature: Vec<u8>,
    },
    IsoKe3 {
        signature: Vec<u8>,
    },
    Sigma1 {
        dh: Vec<u8>,
    },
    Sigma2 {
        dh: Vec<u8>,
        sealed: Vec<u8>,
    },
    Sigma3 {
        sealed: Vec<u8>,
    },
    TlsClientHello {
        version: u16,
        suites: Vec<String>,
        random: Vec<u8>,
    },
    TlsServerHello {
        version: u16,
        suites: Vec<String>,
        random: Vec<u8>,
        cert: Certificate,
        request_cert: bool,
    },
    TlsKeyExchange {
        enc_premaster: Vec<u8>,
        cert: Certificate,
    },
    TlsFinished {
        sealed: Vec<u8>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    M1 = 0x01,
    M2 = 0x02,
    Ack = 0x03,
    Data = 0x04,
    M1h = 0x11,
    M2h = 0x12,
    IsoKe1 = 0x21,
    IsoKe2 = 0x22,
    IsoKe3 = 0x23,
    Sigma1 = 0x31,
    Sigma2 = 0x32,
    Sigma3 = 0x33,
    TlsClientHello = 0x41,
    TlsServerHello = 0x42,
    TlsKeyExchange = 0x43,
    TlsFinished = 0x44,
}

impl Tag {
    pub const ALL: [Tag; 16] = [
        Tag::M1,
        Tag::M2,
        Tag::Ack,
        Tag::Data,
        Tag::M1h,
        Tag::M2h,
        Tag::IsoKe1,
        Tag::IsoKe2,
        Tag::IsoKe3,
        Tag::Sigma1,
        Tag::Sigma2,
        Tag::Sigma3,
        Tag::TlsClientHello,
        Tag::TlsServerHello,
        Tag::TlsKeyExchange,
        Tag::TlsFinished,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Tag> {
        Tag::ALL.into_iter().find(|t| t.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            Tag::M1 => "M1",
            Tag::M2 => "M2",
            Tag::Ack => "ACK",
            Tag::Data => "DATA",
            Tag::M1h => "M1H",
            Tag::M2h => "M2H",
            Tag::IsoKe1 => "ISO1",
            Tag::IsoKe2 => "ISO2",
            Tag::IsoKe3 => "ISO3",
            Tag::Sigma1 => "SIGMA1",
            Tag::Sigma2 => "SIGMA2",
            Tag::Sigma3 => "SIGMA3",
            Tag::TlsClientHello => "TLS_HELLO_C",
            Tag::TlsServerHello => "TLS_HELLO_R",
            Tag::TlsKeyExchange => "TLS_KEX",
            Tag::TlsFinished => "TLS_FINISH",
        }
    }

    /// Declared field kinds, in wire order.
    pub fn schema(self) -> &'static [FieldKind] {
        use FieldKind::*;
        match self {
            Tag::M1 => &[Certificate],
            Tag::M2 | Tag::M2h => &[Certificate, PkCiphertext, PkCiphertext],
            Tag::Ack | Tag::Data => &[SymCiphertext],
            Tag::M1h => &[Certificate, Nonce],
            Tag::IsoKe1 => &[Certificate, DhElement],
            Tag::IsoKe2 => &[Certificate, DhElement, Signature],
            Tag::IsoKe3 => &[Signature],
            Tag::Sigma1 => &[DhElement],
            Tag::Sigma2 => &[DhElement, SymCiphertext],
            Tag::Sigma3 => &[SymCiphertext],
            Tag::TlsClientHello => &[Version, SuiteList, HelloRandom],
            Tag::TlsServerHello => &[Version, SuiteList, HelloRandom, Certificate, Flag],
            Tag::TlsKeyExchange => &[PkCiphertext, Certificate],
            Tag::TlsFinished => &[SymCiphertext],
        }
    }

    /// Handshake frames, as opposed to Ack/Data traffic on the established
    /// channel.
    pub fn is_protocol(self) -> bool {
        !matches!(self, Tag::Ack | Tag::Data)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn join_suites(suites: &[String]) -> Vec<u8> {
    suites.join(",").into_bytes()
}

fn split_suites(bytes: &[u8]) -> Result<Vec<String>, WireError> {
    let s = std::str::from_utf8(bytes).map_err(|_| WireError::BadField("suites"))?;
    if s.is_empty() {
        return Ok(Vec::new());
    }
    Ok(s.split(',').map(str::to_string).collect())
}

impl WireMessage {
    pub fn tag(&self) -> Tag {
        match self {
            WireMessage::M1 { .. } => Tag::M1,
            WireMessage::M2 { .. } => Tag::M2,
            WireMessage::Ack { .. } => Tag::Ack,
            WireMessage::Data { .. } => Tag::Data,
            WireMessage::M1h { .. } => Tag::M1h,
            WireMessage::M2h { .. } => Tag::M2h,
            WireMessage::IsoKe1 { .. } => Tag::IsoKe1,
            WireMessage::IsoKe2 { .. } => Tag::IsoKe2,
            WireMessage::IsoKe3 { .. } => Tag::IsoKe3,
            WireMessage::Sigma1 { .. } => Tag::Sigma1,
            WireMessage::Sigma2 { .. } => Tag::Sigma2,
            WireMessage::Sigma3 { .. } => Tag::Sigma3,
            WireMessage::TlsClientHello { .. } => Tag::TlsClientHello,
            WireMessage::TlsServerHello { .. } => Tag::TlsServerHello,
            WireMessage::TlsKeyExchange { .. } => Tag::TlsKeyExchange,
            WireMessage::TlsFinished { .. } => Tag::TlsFinished,
        }
    }

    /// Field octets in wire order.
    pub fn field_bytes(&self) -> Vec<Vec<u8>> {
        match self {
            WireMessage::M1 { cert } => vec![cert.to_bytes()],
            WireMessage::M2 {
                cert,
                enc_key_blob,
                enc_sig_blob,
            }
            | WireMessage::M2h {
                cert,
                enc_key_blob,
                enc_sig_blob,
            } => vec![cert.to_bytes(), enc_key_blob.clone(), enc_sig_blob.clone()],
            WireMessage::Ack { ciphertext } | WireMessage::Data { ciphertext } => {
                vec![ciphertext.clone()]
            }
            WireMessage::M1h { cert, nonce } => vec![cert.to_bytes(), nonce.clone()],
            WireMessage::IsoKe1 { cert, dh } => vec![cert.to_bytes(), dh.clone()],
            WireMessage::IsoKe2 {
                cert,
                dh,
                signature,
            } => vec![cert.to_bytes(), dh.clone(), signature.clone()],
            WireMessage::IsoKe3 { signature } => vec![signature.clone()],
            WireMessage::Sigma1 { dh } => vec![dh.clone()],
            WireMessage::Sigma2 { dh, sealed } => vec![dh.clone(), sealed.clone()],
            WireMessage::Sigma3 { sealed } | WireMessage::TlsFinished { sealed } => {
                vec![sealed.clone()]
            }
            WireMessage::TlsClientHello {
                version,
                suites,
                random,
            } => vec![
                version.to_be_bytes().to_vec(),
                join_suites(suites),
                random.clone(),
            ],
            WireMessage::TlsServerHello {
                version,
                suites,
                random,
                cert,
                request_cert,
            } => vec![
                version.to_be_bytes().to_vec(),
                join_suites(suites),
                random.clone(),
                cert.to_bytes(),
                vec![*request_cert as u8],
            ],
            WireMessage::TlsKeyExchange {
                enc_premaster,
                cert,
            } => vec![enc_premaster.clone(), cert.to_bytes()],
        }
    }

    /// `(kind, octets)` pairs in wire order.
    pub fn fields(&self) -> Vec<(FieldKind, Vec<u8>)> {
        self.tag()
            .schema()
            .iter()
            .copied()
            .zip(self.field_bytes())
            .collect()
    }

    /// `tag ‖ fields`, without the radio-layer fingerprint.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = vec![self.tag().code()];
        out.extend_from_slice(&join_long_fields(self.field_bytes()));
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (&code, rest) = bytes.split_first().ok_or(DecodeError::Truncated(0))?;
        let tag = Tag::from_code(code).ok_or(WireError::UnknownTag(code))?;
        Self::decode_fields(tag, rest)
    }

    fn decode_fields(tag: Tag, body: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(body);
        let mut fields = Vec::new();
        while !r.is_empty() {
            fields.push(r.long()?.to_vec());
        }
        let expected = tag.schema().len();
        if fields.len() != expected {
            return Err(WireError::FieldCount {
                tag: tag.name(),
                expected,
                found: fields.len(),
            });
        }
        let mut it = fields.into_iter();
        let mut next = || it.next().expect("field count checked");
        let cert = |b: Vec<u8>| Certificate::from_bytes(&b);
        let version = |b: Vec<u8>| -> Result<u16, WireError> {
            let arr: [u8; 2] = b.try_into().map_err(|_| WireError::BadField("version"))?;
            Ok(u16::from_be_bytes(arr))
        };
        Ok(match tag {
            Tag::M1 => WireMessage::M1 { cert: cert(next())? },
            Tag::M2 => WireMessage::M2 {
                cert: cert(next())?,
                enc_key_blob: next(),
                enc_sig_blob: next(),
            },
            Tag::Ack => WireMessage::Ack { ciphertext: next() },
            Tag::Data => WireMessage::Data { ciphertext: next() },
            Tag::M1h => WireMessage::M1h {
                cert: cert(next())?,
                nonce: next(),
            },
            Tag::M2h => WireMessage::M2h {
                cert: cert(next())?,
                enc_key_blob: next(),
                enc_sig_blob: next(),
            },
            Tag::IsoKe1 => WireMessage::IsoKe1 {
                cert: cert(next())?,
                dh: next(),
            },
            Tag::IsoKe2 => WireMessage::IsoKe2 {
                cert: cert(next())?,
                dh: next(),
                signature: next(),
            },
            Tag::IsoKe3 => WireMessage::IsoKe3 { signature: next() },
            Tag::Sigma1 => WireMessage::Sigma1 { dh: next() },
            Tag::Sigma2 => WireMessage::Sigma2 {
                dh: next(),
                sealed: next(),
            },
            Tag::Sigma3 => WireMessage::Sigma3 { sealed: next() },
            Tag::TlsClientHello => WireMessage::TlsClientHello {
                version: version(next())?,
                suites: split_suites(&next())?,
                random: next(),
            },
            Tag::TlsServerHello => WireMessage::TlsServerHello {
                version: version(next())?,
                suites: split_suites(&next())?,
                random: next(),
                cert: cert(next())?,
                request_cert: match next().as_slice() {
                    [0] => false,
                    [1] => true,
                    _ => return Err(WireError::BadField("request_cert")),
                },
            },
            Tag::TlsKeyExchange => WireMessage::TlsKeyExchange {
                enc_premaster: next(),
                cert: cert(next())?,
            },
            Tag::TlsFinished => WireMessage::TlsFinished { sealed: next() },
        })
    }
}

/// A message as emitted on air, stamped with the emitter's transceiver
/// fingerprint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub fingerprint: Fingerprint,
    pub message: WireMessage,
}

impl Frame {
    pub fn new(fingerprint: Fingerprint, message: WireMessage) -> Self {
        Frame {
            fingerprint,
            message,
        }
    }

    pub fn tag(&self) -> Tag {
        self.message.tag()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.push(self.tag().code());
        out.extend_from_slice(&self.fingerprint.0);
        out.extend_from_slice(&join_long_fields(self.message.field_bytes()));
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, WireError> {
        let (&code, rest) = bytes.split_first().ok_or(DecodeError::Truncated(0))?;
        let tag = Tag::from_code(code).ok_or(WireError::UnknownTag(code))?;
        if rest.len() < FINGERPRINT_LEN {
            return Err(DecodeError::Truncated(1).into());
        }
        let (fp, body) = rest.split_at(FINGERPRINT_LEN);
        Ok(Frame {
            fingerprint: Fingerprint(fp.try_into().expect("8 octets")),
            message: WireMessage::decode_fields(tag, body)?,
        })
    }

    /// Re-stamps the frame as emitted by another transceiver.
    pub fn restamped(&self, fingerprint: Fingerprint) -> Frame {
        Frame {
            fingerprint,
            message: self.message.clone(),
        }
    }
}

/// Splits the raw field octets of an encoded frame without interpreting
/// them. Returns `None` for octets that are not a frame.
pub fn raw_frame_fields(bytes: &[u8]) -> Option<(Tag, Fingerprint, Vec<Vec<u8>>)> {
    let (&code, rest) = bytes.split_first()?;
    let tag = Tag::from_code(code)?;
    if rest.len() < FINGERPRINT_LEN {
        return None;
    }
    let (fp, body) = rest.split_at(FINGERPRINT_LEN);
    let fields = split_long_fields(body)?;
    (fields.len() == tag.schema().len())
        .then(|| (tag, Fingerprint(fp.try_into().expect("8 octets")), fields))
}
