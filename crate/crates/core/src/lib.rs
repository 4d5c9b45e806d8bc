//! Key generation by positional extraction from public random broadcasts.
//!
//! Two parties share a balanced key `K` of `2n` bits. The positions of its
//! ones and zeros form two position keys, which both parties apply to every
//! sequence a server broadcasts to read out fresh `n`-bit keys. In System-I
//! the same position keys are reused at every step; System-II spends each
//! extracted key once to carry a fresh balanced key whose position keys are
//! used for exactly one final extraction.
//!
//! Besides the protocols, the crate models an eavesdropper who sees every
//! broadcast and runs the correlation attack on leaked keys, and a Monte
//! Carlo harness that measures the attack against closed-form predictions.
//!
//! - [`bits`]: bitstrings, position keys, extraction, XOR.
//! - [`protocol`]: System-I and System-II sessions, usage ledger, transcripts.
//! - [`adversary`]: eavesdropper view, correlation attack, probability formulas.
//! - [`harness`]: Monte Carlo experiments, exact enumeration oracle, CSV sweeps.
//! - [`transport`]: framed broadcast over in-memory channels or TCP.

pub mod adversary;
pub mod bits;
pub mod cli;
mod error;
pub mod harness;
pub mod protocol;
pub mod transport;

pub use bits::{BitString, PositionKey, SharedKey};
pub use error::{Error, Result};

/// Seeded generator used for every reproducible run.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// A [`SimRng`] seeded from a single integer.
pub fn seeded_rng(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
