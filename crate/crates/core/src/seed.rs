//! Independent random streams derived from one master seed.
//!
//! Every stochastic decision of an experiment draws from a stream keyed by
//! (master seed, generation, member id, purpose), so results do not depend on
//! the order in which workers finish.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Random genome construction.
    Genome = 1,
    /// Mutation of a parent into a child.
    Mutation = 2,
    /// Weight initialisation and episode play.
    Evaluation = 3,
    /// MNIST shuffling for one member.
    Batches = 4,
    /// Experiment-wide choices such as the observation permutation.
    Experiment = 5,
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, generation: u32, member: u64, stream: Stream) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ generation as u64);
    h = splitmix64(h ^ member);
    splitmix64(h ^ stream as u64)
}

pub fn stream_rng(master: u64, generation: u32, member: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, generation, member, stream))
}
