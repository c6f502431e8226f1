//! Named random sub-streams derived from a single root seed.
//!
//! Every stochastic component (workload, QoS noise, training) draws from its
//! own stream so that reseeding one of them leaves the others untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Seed of the stream `name` under `root`.
pub fn substream_seed(root: u64, name: &str) -> u64 {
    splitmix64(root ^ splitmix64(fnv1a(name)))
}

pub fn substream(root: u64, name: &str) -> SimRng {
    SimRng::seed_from_u64(substream_seed(root, name))
}

/// Stream `name` at position `index`, e.g. one independent stream per cycle.
pub fn indexed_stream(root: u64, name: &str, index: u64) -> SimRng {
    SimRng::seed_from_u64(splitmix64(substream_seed(root, name) ^ splitmix64(index)))
}
