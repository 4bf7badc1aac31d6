//! Deterministic derivation of independent random streams.
//!
//! Every stochastic subsystem (channel draws, thermal noise, pilot symbols,
//! network initialization, probe inputs) gets its own ChaCha stream derived
//! from the single experiment seed and a textual tag. The tag is hashed with
//! FNV-1a, mixed into the master seed, and finalized with a splitmix64
//! avalanche so that related tags ("noise/0", "noise/1") land far apart.
//! Re-running with the same seed therefore reproduces every draw exactly,
//! while adding a new consumer never perturbs existing streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collapses a master seed and a stream tag into a child seed.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    splitmix64(master ^ fnv1a64(tag.as_bytes()))
}

/// Independent ChaCha stream for the given tag under the master seed.
pub fn derive_rng(master: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag))
}
