//! Seed derivation. Every random decision in the crate draws from a
//! [`ChaCha8Rng`] derived from a user seed and a stream name, so runs are
//! reproducible across platforms and independent of scheduling.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Seed of the named sub-stream of `seed`.
pub fn sub_seed(seed: u64, stream: &str) -> u64 {
    splitmix64(seed ^ fnv1a(stream))
}

pub fn stream(seed: u64, name: &str) -> Rng {
    Rng::seed_from_u64(sub_seed(seed, name))
}

/// Generator for the `index`-th independent job (tree, electrode, band)
/// of a stream; `seed ^ index` keeps the mapping schedule-free.
pub fn indexed(seed: u64, name: &str, index: u64) -> Rng {
    Rng::seed_from_u64(sub_seed(seed, name) ^ index)
}
