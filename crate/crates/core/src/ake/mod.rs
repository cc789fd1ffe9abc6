//! Signed Diffie-Hellman key agreement variants used for comparison.

pub mod iso;
pub mod sigma;
pub mod tls;

use crate::codec::join_long_fields;
use crate::suite::{CryptoSuite, Digest};

/// Hash of length-prefixed fields, so adjacent fields cannot be re-cut.
pub fn fields_digest(suite: &dyn CryptoSuite, fields: &[&[u8]]) -> Digest {
    suite.hash(&join_long_fields(fields))
}
