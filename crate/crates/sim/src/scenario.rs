//! Scenario runner and the adversary's attack scripts.

use std::sync::Arc;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use vauth_core::attributes::AttributeSet;
use vauth_core::certificates::CertError;
use vauth_core::session::{AbortKind, Identity, Phase, Role, SessionKey};
use vauth_core::suite::SuiteId;
use vauth_core::wire::Frame;
use vauth_core::ProtocolMode;

use crate::config::{ScenarioConfig, Strategy, ValidationError, MAX_DATA_FRAMES, MAX_VEHICLES};
use crate::network::{Endpoint, SimNetwork};
use crate::transcript::{Record, Transcript};
use crate::world::World;

/// First plaintext S sends on a fresh session.
pub const SESSION_OPENER: &[u8] = b"Session starts";

/// What counts as adversary success for a strategy. Fixed per strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// The closure of the overheard traffic holds a session key or a data
    /// plaintext.
    SecrecyBreach,
    /// S and R both established, each with a key the adversary shares.
    BothSidesKeyed,
    /// A fresh responder session established on replayed frames, believing
    /// its peer is S.
    ResponderAcceptedReplay,
    /// A fresh initiator session established on replayed answers and opened
    /// at least one replayed data frame.
    InitiatorOpenedReplay,
    /// The session key is in the closure once both long-term keys leak.
    KeyExposedAfterCorruption,
    /// A session established in S's name, run by the adversary holding
    /// S's long-term keys.
    ImpersonationAccepted,
}

impl Criterion {
    pub fn for_strategy(strategy: Strategy) -> Criterion {
        match strategy {
            Strategy::Passive => Criterion::SecrecyBreach,
            Strategy::MitmRelay => Criterion::BothSidesKeyed,
            Strategy::RepetitionV1 => Criterion::ResponderAcceptedReplay,
            Strategy::RepetitionV2 => Criterion::InitiatorOpenedReplay,
            Strategy::CorruptAfter => Criterion::KeyExposedAfterCorruption,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::SecrecyBreach => "secrecy_breach",
            Criterion::BothSidesKeyed => "both_sides_keyed",
            Criterion::ResponderAcceptedReplay => "responder_accepted_replay",
            Criterion::InitiatorOpenedReplay => "initiator_opened_replay",
            Criterion::KeyExposedAfterCorruption => "key_exposed_after_corruption",
            Criterion::ImpersonationAccepted => "impersonation_accepted",
        }
    }
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartyOutcome {
    pub name: String,
    pub role: Role,
    pub adversarial: bool,
    pub phase: Phase,
    pub abort: Option<AbortKind>,
    pub abort_detail: Option<String>,
    /// Whose certificate the party accepted.
    pub peer: Option<String>,
    /// Who the party was actually exchanging frames with.
    pub actual_peer: String,
}

impl PartyOutcome {
    pub fn established(&self) -> bool {
        self.phase == Phase::Established
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: String,
    pub mode: ProtocolMode,
    pub strategy: Strategy,
    pub seed: u64,
    pub suite: SuiteId,
    pub parties: Vec<PartyOutcome>,
    pub adversary_success: bool,
    pub criterion: Criterion,
    pub closure_contains_session_key: bool,
    pub closure_contains_plaintext: bool,
    /// Handshake frames on air, acknowledgments and data excluded.
    pub frame_count: usize,
    pub transcript: Transcript,
}

impl ScenarioResult {
    pub fn party(&self, name: &str) -> Option<&PartyOutcome> {
        self.parties.iter().find(|p| p.name == name && !p.adversarial)
    }

    pub fn honest(&self) -> impl Iterator<Item = &PartyOutcome> {
        self.parties.iter().filter(|p| !p.adversarial)
    }

    /// `name:Kind` for every honest party that aborted.
    pub fn abort_reasons(&self) -> Vec<String> {
        self.honest()
            .filter_map(|p| p.abort.map(|k| format!("{}:{k}", p.name)))
            .collect()
    }

    /// No honest party established believing it talks to someone other
    /// than the honest vehicle it was actually exchanging frames with.
    pub fn unknown_key_share_free(&self) -> bool {
        self.honest()
            .filter(|p| p.established())
            .all(|p| p.peer.as_deref() == Some(p.actual_peer.as_str()))
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid config: {0}")]
    Config(#[from] ValidationError),
    #[error("enrollment failed: {0}")]
    Enrollment(#[from] CertError),
}

fn check(cfg: &ScenarioConfig) -> Result<(), ValidationError> {
    let invalid = |field: String, message: &str| ValidationError {
        field,
        message: message.to_string(),
    };
    if !(1..=MAX_DATA_FRAMES).contains(&cfg.data_frames) {
        return Err(invalid("scenario.data_frames".into(), "out of range"));
    }
    if cfg.vehicles.len() > MAX_VEHICLES {
        return Err(invalid(format!("vehicles[{MAX_VEHICLES}]"), "too many vehicles"));
    }
    for (i, v) in cfg.vehicles.iter().enumerate() {
        if cfg.vehicles[..i].iter().any(|w| w.id == v.id) {
            return Err(invalid(format!("vehicles[{i}].id"), "duplicate vehicle id"));
        }
    }
    cfg.noise
        .validate()
        .map_err(|e| invalid("noise".into(), &e))
}

enum Success {
    Decided(bool),
    /// Any honest session key or data plaintext is in the closure.
    Disclosure,
    KeyDisclosed(Option<SessionKey>),
}

struct Run {
    world: World,
    net: SimNetwork,
    /// Session keys and plaintexts of honest sessions, for the secrecy
    /// checks.
    keys: Vec<SessionKey>,
    plaintexts: Vec<Vec<u8>>,
    outcomes: Vec<PartyOutcome>,
}

impl Run {
    fn new(cfg: &ScenarioConfig) -> Result<Run, ScenarioError> {
        check(cfg)?;
        let (world, rng) = World::build(cfg)?;
        let transcript = Transcript {
            scenario: cfg.id.clone(),
            suite: cfg.suite.as_str().to_string(),
            mode: cfg.mode.as_str().to_string(),
            strategy: cfg.strategy.as_str().to_string(),
            seed: cfg.seed,
            records: Vec::new(),
        };
        let mut net = SimNetwork::new(cfg.suite, cfg.noise, rng, transcript);
        for secret in world.a.secret_keys() {
            net.knowledge.learn_secret(secret);
        }
        Ok(Run {
            world,
            net,
            keys: Vec::new(),
            plaintexts: Vec::new(),
            outcomes: Vec::new(),
        })
    }

    fn name(&self, id: &Arc<Identity>) -> String {
        id.name.clone()
    }

    fn endpoint(&self, id: &Arc<Identity>, role: Role, sees: &AttributeSet) -> Endpoint {
        Endpoint::honest(self.name(id), self.world.honest_party(role, id), sees.clone())
    }

    fn adversary_endpoint(&self, role: Role) -> Endpoint {
        let a = &self.world.a;
        Endpoint::adversary(self.name(a), self.world.adversary_party(role, a), a.attributes.clone())
    }

    fn plaintext(&mut self, from: &str, i: usize) -> Vec<u8> {
        let mut tag = [0u8; 8];
        self.net.rng.fill_bytes(&mut tag);
        let p = format!("{from} message {i} {}", hex::encode(tag)).into_bytes();
        self.plaintexts.push(p.clone());
        p
    }

    /// Seals on `from`, transmits, and opens on `to` if it is established.
    fn data_frame(&mut self, eps: &mut [Endpoint], from: usize, to: usize, plaintext: &[u8]) -> Option<Frame> {
        let frame = eps[from].party.seal(plaintext).ok()?;
        let (f, t) = (eps[from].name.clone(), eps[to].name.clone());
        self.net.transmit(&f, &t, eps[to].adversarial, &frame);
        let _ = eps[to].party.open(&frame);
        Some(frame)
    }

    /// Initiator `i` sends its messages, the first being the opener; the
    /// responder `r` answers once.
    fn data_phase(&mut self, eps: &mut [Endpoint], i: usize, r: usize) {
        let responder = eps[r].name.clone();
        let initiator = eps[i].name.clone();
        if self.world.cfg.flags.responder_sends_first {
            let p = self.plaintext(&responder, 0);
            self.data_frame(eps, r, i, &p);
        }
        for n in 0..self.world.cfg.data_frames {
            let p = if n == 0 {
                self.plaintexts.push(SESSION_OPENER.to_vec());
                SESSION_OPENER.to_vec()
            } else {
                self.plaintext(&initiator, n)
            };
            self.data_frame(eps, i, r, &p);
        }
        let p = self.plaintext(&responder, 1);
        self.data_frame(eps, r, i, &p);
    }

    /// A complete honest S↔R session with data. Returns the endpoints.
    fn honest_session(&mut self, s: &Arc<Identity>, r: &Arc<Identity>) -> Vec<Endpoint> {
        let mut eps = vec![
            self.endpoint(s, Role::Initiator, &r.attributes),
            self.endpoint(r, Role::Responder, &s.attributes),
        ];
        self.net.run_handshake(&mut eps, &[1, 0], 0);
        self.keep_keys(&eps);
        if eps.iter().all(|e| e.party.phase() == Phase::Established) {
            self.data_phase(&mut eps, 0, 1);
        }
        eps
    }

    fn keep_keys(&mut self, eps: &[Endpoint]) {
        for e in eps.iter().filter(|e| !e.adversarial) {
            if let Some(k) = e.party.session_key() {
                if !self.keys.contains(&k) {
                    self.keys.push(k);
                }
            }
        }
    }

    fn record_outcome(&mut self, ep: &Endpoint, actual_peer: &str) {
        let party = &ep.party;
        self.outcomes.push(PartyOutcome {
            name: ep.name.clone(),
            role: party.role(),
            adversarial: ep.adversarial,
            phase: party.phase(),
            abort: party.abort_reason().map(|e| e.kind()),
            abort_detail: party.abort_reason().map(|e| e.to_string()),
            peer: party
                .peer_certificate()
                .map(|c| self.world.name_of(c).unwrap_or("unknown").to_string()),
            actual_peer: actual_peer.to_string(),
        });
    }

    fn finish(self, success: Success) -> ScenarioResult {
        let closure = self.net.knowledge.clone().closure();
        let closure_contains_session_key = self.keys.iter().any(|k| closure.contains(k.as_bytes()));
        let closure_contains_plaintext = self.plaintexts.iter().any(|p| closure.contains(p));
        let success = match success {
            Success::Decided(b) => b,
            Success::Disclosure => closure_contains_session_key || closure_contains_plaintext,
            Success::KeyDisclosed(key) => key.is_some_and(|k| closure.contains(k.as_bytes())),
        };
        let cfg = &self.world.cfg;
        let frame_count = self.net.transcript.protocol_frames();
        ScenarioResult {
            scenario: cfg.id.clone(),
            mode: cfg.mode,
            strategy: cfg.strategy,
            seed: cfg.seed,
            suite: cfg.suite,
            parties: self.outcomes,
            adversary_success: success,
            criterion: Criterion::for_strategy(cfg.strategy),
            closure_contains_session_key,
            closure_contains_plaintext,
            frame_count,
            transcript: self.net.transcript,
        }
    }
}

/// Runs one scenario. Deterministic in `cfg`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult, ScenarioError> {
    let run = Run::new(cfg)?;
    match cfg.strategy {
        Strategy::Passive => Ok(passive(run)),
        Strategy::MitmRelay => Ok(mitm_relay(run)),
        Strategy::RepetitionV1 => Ok(repetition_v1(run)),
        Strategy::RepetitionV2 => repetition_v2(run),
        Strategy::CorruptAfter => Ok(corrupt_after(run)),
    }
}

fn passive(mut run: Run) -> ScenarioResult {
    let (s, r) = (run.world.s.clone(), run.world.r.clone());
    let eps = run.honest_session(&s, &r);
    run.record_outcome(&eps[0], &r.name);
    run.record_outcome(&eps[1], &s.name);
    run.finish(Success::Disclosure)
}

/// Honest session, then both long-term keys leak.
fn corrupt_after(mut run: Run) -> ScenarioResult {
    let (s, r) = (run.world.s.clone(), run.world.r.clone());
    let eps = run.honest_session(&s, &r);
    run.record_outcome(&eps[0], &r.name);
    run.record_outcome(&eps[1], &s.name);
    let target = eps[0].party.session_key();
    drop(eps);
    for secret in s.secret_keys().into_iter().chain(r.secret_keys()) {
        run.net.knowledge.learn_secret(secret);
    }
    run.finish(Success::KeyDisclosed(target))
}

/// A sits between S and R, answering each under its own certificate.
/// Each honest party's sensors point at the vehicle it means to talk to.
fn mitm_relay(mut run: Run) -> ScenarioResult {
    let (s, r) = (run.world.s.clone(), run.world.r.clone());
    let mut eps = vec![
        run.endpoint(&s, Role::Initiator, &r.attributes),
        run.adversary_endpoint(Role::Responder),
        run.adversary_endpoint(Role::Initiator),
        run.endpoint(&r, Role::Responder, &s.attributes),
    ];
    let route = [1, 0, 3, 2];
    let mut initial = Vec::new();
    for i in [0, 2] {
        if let Ok(frames) = eps[i].party.start(&mut run.net.rng) {
            initial.extend(frames.into_iter().map(|f| (i, f)));
        }
    }
    run.net.pump(&mut eps, &route, initial);
    run.keep_keys(&eps);

    let established = |e: &Endpoint| e.party.phase() == Phase::Established;
    let keyed = eps.iter().all(established)
        && eps[0].party.session_key() == eps[1].party.session_key()
        && eps[3].party.session_key() == eps[2].party.session_key();
    if keyed {
        relay_data(&mut run, &mut eps);
    }
    let a = run.world.a.name.clone();
    for ep in &eps[..] {
        run.record_outcome(ep, if ep.adversarial { "-" } else { &a });
    }
    run.finish(Success::Decided(keyed))
}

/// Opens what S sends and re-seals it for R, and back.
fn relay_data(run: &mut Run, eps: &mut [Endpoint]) {
    let forward = |run: &mut Run, eps: &mut [Endpoint], from: usize, via_in: usize, via_out: usize, to: usize, p: &[u8]| {
        if let Some(frame) = run.data_frame(eps, from, via_in, p) {
            if let Ok(plain) = eps[via_in].party.open(&frame) {
                run.data_frame(eps, via_out, to, &plain);
            }
        }
    };
    run.plaintexts.push(SESSION_OPENER.to_vec());
    forward(run, eps, 0, 1, 2, 3, SESSION_OPENER);
    for n in 1..run.world.cfg.data_frames {
        let name = eps[0].name.clone();
        let p = run.plaintext(&name, n);
        forward(run, eps, 0, 1, 2, 3, &p);
    }
    let name = eps[3].name.clone();
    let p = run.plaintext(&name, 1);
    forward(run, eps, 3, 2, 1, 0, &p);
}

/// Handshake frames `sender` emitted in the recorded part of the log.
fn recorded_from(records: &[Record], sender: &str, data: bool) -> Vec<Frame> {
    records
        .iter()
        .filter(|r| r.from == sender && r.is_data() == data)
        .filter_map(Record::decode)
        .collect()
}

/// Feeds recorded frames to `target` one by one, each after the target's
/// previous answer, stopping once it aborts. The target's answers are
/// captured by the adversary.
fn replay_into(run: &mut Run, target: &mut Endpoint, frames: &[Frame], answer_to: &str) {
    let a = run.world.a.name.clone();
    for frame in frames {
        if target.party.phase() == Phase::Aborted {
            break;
        }
        if let Ok(out) = run.net.send(&a, target, frame) {
            for f in out {
                run.net.transmit(&target.name, answer_to, true, &f);
            }
        }
    }
}

/// A replays S's recorded handshake frames to a fresh session of R.
fn repetition_v1(mut run: Run) -> ScenarioResult {
    let (s, r) = (run.world.s.clone(), run.world.r.clone());
    let eps = run.honest_session(&s, &r);
    run.record_outcome(&eps[0], &r.name);
    run.record_outcome(&eps[1], &s.name);
    drop(eps);

    let replayed = recorded_from(&run.net.transcript.records, &s.name, false);
    let mut fresh = run.endpoint(&r, Role::Responder, &s.attributes);
    replay_into(&mut run, &mut fresh, &replayed, &s.name);
    if fresh.party.phase() == Phase::Established && run.world.cfg.flags.responder_sends_first {
        let p = run.plaintext(&r.name, 0);
        if let Ok(frame) = fresh.party.seal(&p) {
            run.net.transmit(&r.name, &s.name, true, &frame);
        }
    }
    let success = fresh.party.phase() == Phase::Established
        && fresh.party.peer_certificate() == Some(&s.certificate);
    let a = run.world.a.name.clone();
    run.record_outcome(&fresh, &a);
    run.finish(Success::Decided(success))
}

/// Name given to the lookalike of R.
pub const LOOKALIKE_SUFFIX: &str = "'";

/// A answers a fresh session of S with R's recorded frames, then R's
/// recorded data.
fn repetition_v2(mut run: Run) -> Result<ScenarioResult, ScenarioError> {
    let (s, r) = (run.world.s.clone(), run.world.r.clone());
    let eps = run.honest_session(&s, &r);
    run.record_outcome(&eps[0], &r.name);
    run.record_outcome(&eps[1], &s.name);
    drop(eps);
    let records = run.net.transcript.records.clone();
    let answers = recorded_from(&records, &r.name, false);
    let data = recorded_from(&records, &r.name, true);

    let s_now = if run.world.cfg.flags.renew_before_replay {
        run.world.renew_s()?
    } else {
        s.clone()
    };
    // S faces R again, or a vehicle that looks exactly like R
    let facing = if run.world.cfg.flags.similar_attributes {
        format!("{}{LOOKALIKE_SUFFIX}", r.name)
    } else {
        r.name.clone()
    };
    let mut fresh = run.endpoint(&s_now, Role::Initiator, &r.attributes);
    if let Ok(first) = fresh.party.start(&mut run.net.rng) {
        for f in first {
            run.net.transmit(&s.name, &facing, true, &f);
        }
    }
    replay_into(&mut run, &mut fresh, &answers, &facing);
    let mut opened = 0;
    if fresh.party.phase() == Phase::Established {
        let a = run.world.a.name.clone();
        for frame in &data {
            run.net.transmit(&a, &s.name, false, frame);
            if fresh.party.open(frame).is_ok() {
                opened += 1;
            }
        }
    }
    let success = fresh.party.phase() == Phase::Established && opened > 0;
    let a = run.world.a.name.clone();
    run.record_outcome(&fresh, &a);
    Ok(run.finish(Success::Decided(success)))
}

/// Key-compromise impersonation: A holds S's certificate and long-term
/// keys and opens a session with R in S's name. Without transceiver theft
/// A's frames carry its own radio's fingerprint.
pub fn impersonate_corrupted(cfg: &ScenarioConfig) -> Result<ScenarioResult, ScenarioError> {
    let mut run = Run::new(cfg)?;
    let (s, r) = (run.world.s.clone(), run.world.r.clone());
    for secret in s.secret_keys() {
        run.net.knowledge.learn_secret(secret);
    }
    let mut stolen = (*s).clone();
    if !cfg.flags.transceiver_theft {
        stolen.radio = run.world.a.radio;
    }
    let stolen = Arc::new(stolen);
    let mut eps = vec![
        Endpoint::adversary(run.world.a.name.clone(), run.world.adversary_party(Role::Initiator, &stolen), r.attributes.clone()),
        run.endpoint(&r, Role::Responder, &s.attributes),
    ];
    run.net.run_handshake(&mut eps, &[1, 0], 0);
    let success = eps[1].party.phase() == Phase::Established
        && eps[1].party.peer_certificate() == Some(&s.certificate);
    let a = run.world.a.name.clone();
    run.record_outcome(&eps[0], "-");
    run.record_outcome(&eps[1], &a);
    run.keep_keys(&eps[1..]);
    let mut result = run.finish(Success::Decided(success));
    result.criterion = Criterion::ImpersonationAccepted;
    Ok(result)
}

/// Outcome of one honest S↔R session, without the adversary's closure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HonestRun {
    pub initiator: PartyOutcome,
    pub responder: PartyOutcome,
    /// Both established with octet-equal keys.
    pub keys_agree: bool,
    pub frame_count: usize,
    pub transcript: Transcript,
}

pub fn run_honest(cfg: &ScenarioConfig) -> Result<HonestRun, ScenarioError> {
    let mut run = Run::new(cfg)?;
    let (s, r) = (run.world.s.clone(), run.world.r.clone());
    let eps = run.honest_session(&s, &r);
    let (ks, kr) = (eps[0].party.session_key(), eps[1].party.session_key());
    run.record_outcome(&eps[0], &r.name);
    run.record_outcome(&eps[1], &s.name);
    let responder = run.outcomes.pop().expect("two outcomes");
    let initiator = run.outcomes.pop().expect("two outcomes");
    Ok(HonestRun {
        keys_agree: initiator.established() && responder.established() && ks.is_some() && ks == kr,
        initiator,
        responder,
        frame_count: run.net.transcript.protocol_frames(),
        transcript: run.net.transcript,
    })
}
