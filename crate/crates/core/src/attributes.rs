//! Out-of-band sense-able vehicle identity and the simulated sensing
//! channel a peer uses to check it.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{DecodeError, Reader, Writer};

pub const FINGERPRINT_LEN: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("license number must be 5-10 uppercase alphanumeric characters, got {0:?}")]
    LicenseNumber(String),
    #[error("brand must be non-empty single-line text")]
    Brand,
    #[error("texture mark {0:?} must be non-empty and free of commas and whitespace")]
    TextureMark(String),
    #[error("malformed attribute encoding: {0}")]
    Decode(#[from] DecodeError),
}

/// Identifier of a physical radio transceiver.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Fingerprint(pub [u8; FINGERPRINT_LEN]);

impl Fingerprint {
    pub fn random(rng: &mut dyn RngCore) -> Self {
        let mut b = [0u8; FINGERPRINT_LEN];
        rng.fill_bytes(&mut b);
        Fingerprint(b)
    }

    pub fn as_bytes(&self) -> &[u8; FINGERPRINT_LEN] {
        &self.0
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fingerprint({self})")
    }
}

impl FromStr for Fingerprint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s).map_err(|e| format!("invalid hex: {e}"))?;
        let arr: [u8; FINGERPRINT_LEN] = bytes
            .try_into()
            .map_err(|_| format!("fingerprint must be {FINGERPRINT_LEN} octets"))?;
        Ok(Fingerprint(arr))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    White,
    Black,
    Silver,
    Gray,
    Red,
    Blue,
    Green,
    Yellow,
    Brown,
    Orange,
}

impl Color {
    pub const ALL: [Color; 10] = [
        Color::White,
        Color::Black,
        Color::Silver,
        Color::Gray,
        Color::Red,
        Color::Blue,
        Color::Green,
        Color::Yellow,
        Color::Brown,
        Color::Orange,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Color::White => "white",
            Color::Black => "black",
            Color::Silver => "silver",
            Color::Gray => "gray",
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Green => "green",
            Color::Yellow => "yellow",
            Color::Brown => "brown",
            Color::Orange => "orange",
        }
    }

    fn code(self) -> u8 {
        Color::ALL.iter().position(|&c| c == self).expect("listed") as u8
    }

    fn from_code(code: u8) -> Option<Color> {
        Color::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Color {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Color::ALL
            .into_iter()
            .find(|c| c.token() == s)
            .ok_or_else(|| {
                let valid: Vec<_> = Color::ALL.iter().map(|c| c.token()).collect();
                format!("unknown color `{s}` (expected one of: {})", valid.join(", "))
            })
    }
}

/// The fixed physical identity of a vehicle, as certified by the CA.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AttributeSet {
    pub license_number: String,
    pub brand: String,
    pub color: Color,
    pub texture_marks: Vec<String>,
    pub transceiver_fingerprint: Fingerprint,
}

const BRANDS: [&str; 8] = [
    "Volvo", "Skoda", "Toyota", "Fiat", "Renault", "Mazda", "Kia", "Opel",
];
const MARKS: [&str; 6] = [
    "dent-left-door",
    "scratch-rear",
    "roof-rack",
    "tow-hitch",
    "repaint-hood",
    "decal-side",
];
const LICENSE_ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

impl AttributeSet {
    pub fn validate(&self) -> Result<(), EncodingError> {
        let l = &self.license_number;
        if !(5..=10).contains(&l.len())
            || !l
                .bytes()
                .all(|b| b.is_ascii_uppercase() || b.is_ascii_digit())
        {
            return Err(EncodingError::LicenseNumber(l.clone()));
        }
        if self.brand.is_empty() || self.brand.contains(['\n', '\r']) {
            return Err(EncodingError::Brand);
        }
        for m in &self.texture_marks {
            if m.is_empty() || m.contains(',') || m.contains(char::is_whitespace) {
                return Err(EncodingError::TextureMark(m.clone()));
            }
        }
        Ok(())
    }

    /// Deterministic, injective, self-delimiting encoding: length-prefixed
    /// fields in declaration order.
    pub fn canonical_encode(&self) -> Result<Vec<u8>, EncodingError> {
        self.validate()?;
        let mut w = Writer::new();
        w.short(self.license_number.as_bytes())
            .short(self.brand.as_bytes())
            .u8(self.color.code())
            .raw(&(self.texture_marks.len() as u16).to_be_bytes());
        for m in &self.texture_marks {
            w.short(m.as_bytes());
        }
        w.raw(&self.transceiver_fingerprint.0);
        Ok(w.finish())
    }

    pub fn canonical_decode(bytes: &[u8]) -> Result<Self, EncodingError> {
        let mut r = Reader::new(bytes);
        let attrs = Self::read(&mut r)?;
        r.finish()?;
        Ok(attrs)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, EncodingError> {
        let text = |b: &[u8], what| {
            String::from_utf8(b.to_vec()).map_err(|_| DecodeError::Invalid(what))
        };
        let license_number = text(r.short()?, "license_number")?;
        let brand = text(r.short()?, "brand")?;
        let color = Color::from_code(r.u8()?).ok_or(DecodeError::Invalid("color"))?;
        let n = r.u16()?;
        let texture_marks = (0..n)
            .map(|_| Ok(text(r.short()?, "texture_marks")?))
            .collect::<Result<Vec<_>, EncodingError>>()?;
        let fp: [u8; FINGERPRINT_LEN] = r.take(FINGERPRINT_LEN)?.try_into().expect("8 octets");
        let attrs = AttributeSet {
            license_number,
            brand,
            color,
            texture_marks,
            transceiver_fingerprint: Fingerprint(fp),
        };
        attrs.validate()?;
        Ok(attrs)
    }

    /// A plausible random vehicle.
    pub fn random(rng: &mut dyn RngCore) -> Self {
        let pick = |rng: &mut dyn RngCore, n: usize| (rng.next_u32() as usize) % n;
        let len = 7 + pick(rng, 2);
        let license_number = (0..len)
            .map(|_| LICENSE_ALPHABET[pick(rng, LICENSE_ALPHABET.len())] as char)
            .collect();
        let brand = BRANDS[pick(rng, BRANDS.len())].to_string();
        let color = Color::ALL[pick(rng, Color::ALL.len())];
        let n_marks = pick(rng, 3);
        let mut texture_marks: Vec<String> = Vec::new();
        for _ in 0..n_marks {
            let m = MARKS[pick(rng, MARKS.len())].to_string();
            if !texture_marks.contains(&m) {
                texture_marks.push(m);
            }
        }
        AttributeSet {
            license_number,
            brand,
            color,
            texture_marks,
            transceiver_fingerprint: Fingerprint::random(rng),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeField {
    LicenseNumber,
    Brand,
    Color,
    TextureMarks,
    TransceiverFingerprint,
}

impl AttributeField {
    pub const ALL: [AttributeField; 5] = [
        AttributeField::LicenseNumber,
        AttributeField::Brand,
        AttributeField::Color,
        AttributeField::TextureMarks,
        AttributeField::TransceiverFingerprint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttributeField::LicenseNumber => "license_number",
            AttributeField::Brand => "brand",
            AttributeField::Color => "color",
            AttributeField::TextureMarks => "texture_marks",
            AttributeField::TransceiverFingerprint => "transceiver_fingerprint",
        }
    }

    /// The sensor that observes this field.
    pub fn channel(self) -> SensingChannel {
        match self {
            AttributeField::TransceiverFingerprint => SensingChannel::RfFingerprint,
            _ => SensingChannel::Visual,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for AttributeField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttributeField::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown attribute field `{s}`"))
    }
}

/// One value per [`AttributeField`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerField<T>(pub [T; 5]);

impl<T: Copy> PerField<T> {
    pub fn splat(v: T) -> Self {
        PerField([v; 5])
    }

    pub fn iter(&self) -> impl Iterator<Item = (AttributeField, T)> + '_ {
        AttributeField::ALL.into_iter().map(move |f| (f, self[f]))
    }
}

impl<T> Index<AttributeField> for PerField<T> {
    type Output = T;

    fn index(&self, f: AttributeField) -> &T {
        &self.0[f.index()]
    }
}

impl<T> IndexMut<AttributeField> for PerField<T> {
    fn index_mut(&mut self, f: AttributeField) -> &mut T {
        &mut self.0[f.index()]
    }
}

/// Per-field probability that a sensor reports a corrupted value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub corruption: PerField<f64>,
}

impl Default for NoiseProfile {
    fn default() -> Self {
        NoiseProfile::zero()
    }
}

impl NoiseProfile {
    pub fn zero() -> Self {
        NoiseProfile {
            corruption: PerField::splat(0.0),
        }
    }

    pub fn with(mut self, field: AttributeField, probability: f64) -> Self {
        self.corruption[field] = probability;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        for (f, p) in self.corruption.iter() {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("noise.{}: probability {p} outside [0, 1]", f.name()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensingChannel {
    Visual,
    Acoustic,
    RfFingerprint,
}

/// What a vehicle's sensors report about a neighbor.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorReading {
    pub observed: AttributeSet,
    pub channel: SensingChannel,
    pub confidence: PerField<f64>,
    pub unobserved: Vec<AttributeField>,
}

impl SensorReading {
    /// A perfect reading of `attrs`.
    pub fn exact(attrs: &AttributeSet) -> Self {
        SensorReading {
            observed: attrs.clone(),
            channel: SensingChannel::Visual,
            confidence: PerField::splat(1.0),
            unobserved: Vec::new(),
        }
    }

    pub fn without(mut self, field: AttributeField) -> Self {
        if !self.unobserved.contains(&field) {
            self.unobserved.push(field);
        }
        self.confidence[field] = 0.0;
        self
    }
}

fn unit_f64(rng: &mut dyn RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn corrupt(attrs: &mut AttributeSet, field: AttributeField, rng: &mut dyn RngCore) {
    match field {
        AttributeField::LicenseNumber => {
            let mut bytes = attrs.license_number.clone().into_bytes();
            let i = rng.next_u32() as usize % bytes.len();
            let old = bytes[i];
            let mut new = old;
            while new == old {
                new = LICENSE_ALPHABET[rng.next_u32() as usize % LICENSE_ALPHABET.len()];
            }
            bytes[i] = new;
            attrs.license_number = String::from_utf8(bytes).expect("ascii");
        }
        AttributeField::Brand => attrs.brand.push('?'),
        AttributeField::Color => {
            let old = attrs.color;
            while attrs.color == old {
                attrs.color = Color::ALL[rng.next_u32() as usize % Color::ALL.len()];
            }
        }
        AttributeField::TextureMarks => attrs.texture_marks.push("smudge".to_string()),
        AttributeField::TransceiverFingerprint => {
            let i = rng.next_u32() as usize % FINGERPRINT_LEN;
            let flip = (rng.next_u32() % 255 + 1) as u8;
            attrs.transceiver_fingerprint.0[i] ^= flip;
        }
    }
}

/// Simulates sensing `truth`. A field is corrupted with its profile
/// probability; confidence reports the sensor's prior reliability.
pub fn sense(truth: &AttributeSet, noise: &NoiseProfile, rng: &mut dyn RngCore) -> SensorReading {
    let mut observed = truth.clone();
    let mut confidence = PerField::splat(1.0);
    for field in AttributeField::ALL {
        let p = noise.corruption[field];
        confidence[field] = 1.0 - p;
        if p > 0.0 && unit_f64(rng) < p {
            corrupt(&mut observed, field, rng);
        }
    }
    SensorReading {
        observed,
        channel: SensingChannel::Visual,
        confidence,
        unobserved: Vec::new(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldVerdict {
    Match,
    Mismatch,
    Unobserved,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldRole {
    Mandatory,
    Advisory,
}

/// Which fields must match, and whether a mismatch on an advisory field
/// still fails the check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchPolicy {
    pub roles: PerField<FieldRole>,
    pub advisory_mismatch_fails: bool,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        MatchPolicy::strict()
    }
}

impl MatchPolicy {
    /// License number and transceiver fingerprint are mandatory; any
    /// observed mismatch fails.
    pub fn strict() -> Self {
        let mut roles = PerField::splat(FieldRole::Advisory);
        roles[AttributeField::LicenseNumber] = FieldRole::Mandatory;
        roles[AttributeField::TransceiverFingerprint] = FieldRole::Mandatory;
        MatchPolicy {
            roles,
            advisory_mismatch_fails: true,
        }
    }

    /// Mandatory fields as in [`MatchPolicy::strict`], advisory mismatches
    /// only lower the trust level.
    pub fn lenient() -> Self {
        MatchPolicy {
            advisory_mismatch_fails: false,
            ..MatchPolicy::strict()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchReport {
    pub verdicts: PerField<FieldVerdict>,
    pub overall: bool,
}

impl MatchReport {
    /// Fraction of fields that matched.
    pub fn trust_level(&self) -> f64 {
        let matched = self
            .verdicts
            .iter()
            .filter(|(_, v)| *v == FieldVerdict::Match)
            .count();
        matched as f64 / AttributeField::ALL.len() as f64
    }

    pub fn mismatched(&self) -> Vec<AttributeField> {
        self.verdicts
            .iter()
            .filter(|(_, v)| *v == FieldVerdict::Mismatch)
            .map(|(f, _)| f)
            .collect()
    }
}

fn field_eq(a: &AttributeSet, b: &AttributeSet, field: AttributeField) -> bool {
    match field {
        AttributeField::LicenseNumber => a.license_number == b.license_number,
        AttributeField::Brand => a.brand == b.brand,
        AttributeField::Color => a.color == b.color,
        AttributeField::TextureMarks => a.texture_marks == b.texture_marks,
        AttributeField::TransceiverFingerprint => {
            a.transceiver_fingerprint == b.transceiver_fingerprint
        }
    }
}

/// Compares a reading against certified attributes under the strict policy.
pub fn match_attributes(certified: &AttributeSet, reading: &SensorReading) -> MatchReport {
    match_with_policy(&MatchPolicy::strict(), certified, reading)
}

pub fn match_with_policy(
    policy: &MatchPolicy,
    certified: &AttributeSet,
    reading: &SensorReading,
) -> MatchReport {
    let mut verdicts = PerField::splat(FieldVerdict::Unobserved);
    for field in AttributeField::ALL {
        verdicts[field] = if reading.unobserved.contains(&field) {
            FieldVerdict::Unobserved
        } else if field_eq(certified, &reading.observed, field) {
            FieldVerdict::Match
        } else {
            FieldVerdict::Mismatch
        };
    }
    let overall = verdicts.iter().all(|(field, verdict)| {
        match (policy.roles[field], verdict) {
            (FieldRole::Mandatory, v) => v == FieldVerdict::Match,
            (FieldRole::Advisory, FieldVerdict::Mismatch) => !policy.advisory_mismatch_fails,
            (FieldRole::Advisory, _) => true,
        }
    });
    MatchReport { verdicts, overall }
}
