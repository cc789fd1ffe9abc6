//! Vehicle-to-vehicle session-key establishment where certificates are
//! coupled to a vehicle's physically observable attributes.
//!
//! The crate holds the protocol state machines and their building blocks:
//! pluggable crypto suites, attribute matching, certificates, the wire
//! format, and the comparison key-exchange variants. Simulation and attacks
//! live in `vauth-sim`.

pub mod ake;
pub mod attributes;
pub mod base;
pub mod certificates;
pub mod codec;
pub mod hardened;
pub mod party;
pub mod session;
pub mod suite;
pub mod wire;

pub use party::{new_party, Party, ProtocolMode};
pub use session::{Identity, Phase, ProtocolError, Role, SessionEnv, SessionKey};
pub use suite::{CryptoSuite, SuiteId};
