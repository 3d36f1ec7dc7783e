//! Seed derivation.
//!
//! Every random quantity is drawn from a `ChaCha8Rng` seeded with
//! `derive_seed(parent, domain, index)`, a SplitMix64 mix of the three
//! inputs. Streams with different `(domain, index)` under the same parent
//! seed are unrelated, and no stream depends on any other being drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domains keep e.g. "matrix 3 of a Haar tuple" and "restart 3 of a solve"
/// from sharing a stream.
pub mod domain {
    pub const HAAR_MATRIX: u64 = 0x01;
    pub const PERMUTATION: u64 = 0x02;
    pub const SEQUENCE_TUPLE: u64 = 0x03;
    pub const SOLVER_START: u64 = 0x04;
    pub const PAIR_JOB: u64 = 0x05;
    pub const WORD_SAMPLE: u64 = 0x06;
    pub const ORACLE_INSTANCE: u64 = 0x07;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(parent) ^ domain) ^ index)
}

pub fn stream(parent: u64, domain: u64, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(parent, domain, index))
}
