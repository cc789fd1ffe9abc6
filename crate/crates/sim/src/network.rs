//! The simulated air interface: a FIFO of frames between endpoints,
//! one tick per delivery, with the adversary overhearing everything.

use std::collections::VecDeque;

use rand_chacha::ChaCha20Rng;
use vauth_core::attributes::{sense, AttributeSet, NoiseProfile};
use vauth_core::session::ProtocolError;
use vauth_core::suite::SuiteId;
use vauth_core::wire::Frame;
use vauth_core::Party;

use crate::knowledge::Knowledge;
use crate::transcript::{Record, Transcript};

/// Upper bound on deliveries in one pump, against runaway loops.
const MAX_DELIVERIES: usize = 256;

/// A protocol session bound to a vehicle on the network.
#[derive(Debug)]
pub struct Endpoint {
    pub name: String,
    pub party: Box<dyn Party>,
    /// True attributes of whichever vehicle this endpoint's sensors point at.
    pub sees: AttributeSet,
    /// Run by the adversary; frames delivered here count as intercepted.
    pub adversarial: bool,
}

impl Endpoint {
    pub fn honest(name: impl Into<String>, party: Box<dyn Party>, sees: AttributeSet) -> Self {
        Endpoint {
            name: name.into(),
            party,
            sees,
            adversarial: false,
        }
    }

    pub fn adversary(name: impl Into<String>, party: Box<dyn Party>, sees: AttributeSet) -> Self {
        Endpoint {
            name: name.into(),
            party,
            sees,
            adversarial: true,
        }
    }
}

#[derive(Debug)]
pub struct SimNetwork {
    tick: u64,
    noise: NoiseProfile,
    pub rng: ChaCha20Rng,
    pub transcript: Transcript,
    /// What the adversary has overheard or been given.
    pub knowledge: Knowledge,
}

impl SimNetwork {
    pub fn new(suite: SuiteId, noise: NoiseProfile, rng: ChaCha20Rng, transcript: Transcript) -> Self {
        SimNetwork {
            tick: 0,
            noise,
            rng,
            transcript,
            knowledge: Knowledge::new(suite),
        }
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Logs a frame on air. The adversary hears every transmission.
    pub fn transmit(&mut self, from: &str, to: &str, intercepted: bool, frame: &Frame) {
        let encoded = frame.encode();
        self.knowledge.observe_frame(&encoded);
        self.transcript.records.push(Record {
            tick: self.tick,
            from: from.to_string(),
            to: to.to_string(),
            intercepted,
            tag: frame.tag().name().to_string(),
            frame: encoded,
        });
        self.tick += 1;
    }

    /// Hands a handshake frame to `to`, sensing whatever it looks at.
    pub fn deliver(&mut self, to: &mut Endpoint, frame: &Frame) -> Result<Vec<Frame>, ProtocolError> {
        let reading = sense(&to.sees, &self.noise, &mut self.rng);
        to.party.handle(frame, &reading, &mut self.rng)
    }

    /// Transmits then delivers.
    pub fn send(
        &mut self,
        from: &str,
        to: &mut Endpoint,
        frame: &Frame,
    ) -> Result<Vec<Frame>, ProtocolError> {
        let name = to.name.clone();
        self.transmit(from, &name, to.adversarial, frame);
        self.deliver(to, frame)
    }

    /// Runs frames to quiescence. `route[i]` is where endpoint `i`'s
    /// output goes. A failed delivery aborts only the receiving party.
    pub fn pump(&mut self, endpoints: &mut [Endpoint], route: &[usize], initial: Vec<(usize, Frame)>) {
        let mut queue: VecDeque<(usize, Frame)> = initial.into();
        let mut budget = MAX_DELIVERIES;
        while let Some((from, frame)) = queue.pop_front() {
            if budget == 0 {
                break;
            }
            budget -= 1;
            let to = route[from];
            let sender = endpoints[from].name.clone();
            if let Ok(out) = self.send(&sender, &mut endpoints[to], &frame) {
                queue.extend(out.into_iter().map(|f| (to, f)));
            }
        }
    }

    /// Starts `initiator` and pumps.
    pub fn run_handshake(&mut self, endpoints: &mut [Endpoint], route: &[usize], initiator: usize) {
        let Ok(first) = endpoints[initiator].party.start(&mut self.rng) else {
            return;
        };
        self.pump(endpoints, route, first.into_iter().map(|f| (initiator, f)).collect());
    }
}
