//! Event log of everything that crossed the simulated air interface.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use vauth_core::wire::{Frame, Tag};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub tick: u64,
    pub from: String,
    pub to: String,
    /// The frame reached the adversary instead of its addressee.
    pub intercepted: bool,
    pub tag: String,
    #[serde(with = "hex_bytes")]
    pub frame: Vec<u8>,
}

impl Record {
    pub fn decode(&self) -> Option<Frame> {
        Frame::decode(&self.frame).ok()
    }

    pub fn payload_digest(&self) -> String {
        hex::encode(Sha256::digest(&self.frame))
    }

    /// Handshake frames; acknowledgments and data are not counted.
    pub fn is_protocol(&self) -> bool {
        self.frame
            .first()
            .and_then(|&c| Tag::from_code(c))
            .is_some_and(Tag::is_protocol)
    }

    pub fn is_data(&self) -> bool {
        self.frame.first() == Some(&Tag::Data.code())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub scenario: String,
    pub suite: String,
    pub mode: String,
    pub strategy: String,
    pub seed: u64,
    pub records: Vec<Record>,
}

impl Transcript {
    pub fn protocol_frames(&self) -> usize {
        self.records.iter().filter(|r| r.is_protocol()).count()
    }

    /// One header line, then one line per frame:
    /// `tick from to intercepted tag sha256 [hex]`.
    pub fn export(&self, verbose: bool) -> String {
        let mut out = format!(
            "# scenario={} suite={} mode={} strategy={} seed={}\n",
            self.scenario, self.suite, self.mode, self.strategy, self.seed
        );
        for r in &self.records {
            out.push_str(&format!(
                "{} {} {} {} {} {}",
                r.tick,
                r.from,
                r.to,
                r.intercepted,
                r.tag,
                r.payload_digest()
            ));
            if verbose {
                out.push(' ');
                out.push_str(&hex::encode(&r.frame));
            }
            out.push('\n');
        }
        out
    }
}

/// A parsed export line. `frame` is present only in verbose exports.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExportLine {
    pub tick: u64,
    pub from: String,
    pub to: String,
    pub intercepted: bool,
    pub tag: String,
    pub digest: String,
    pub frame: Option<Vec<u8>>,
}

pub fn parse_export_line(line: &str) -> Result<ExportLine, String> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    if !(6..=7).contains(&parts.len()) {
        return Err(format!("expected 6 or 7 fields, found {}", parts.len()));
    }
    let frame = parts
        .get(6)
        .map(|h| hex::decode(h).map_err(|e| format!("payload: {e}")))
        .transpose()?;
    Ok(ExportLine {
        tick: parts[0].parse().map_err(|_| format!("bad tick `{}`", parts[0]))?,
        from: parts[1].to_string(),
        to: parts[2].to_string(),
        intercepted: parts[3].parse().map_err(|_| format!("bad flag `{}`", parts[3]))?,
        tag: parts[4].to_string(),
        digest: parts[5].to_string(),
        frame,
    })
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}
