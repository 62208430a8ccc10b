//! Seeded random streams.
//!
//! Every unit of parallel work (a bootstrap iteration, a Monte Carlo trial)
//! gets a stream derived from the run seed and its position, so the values
//! drawn never depend on which worker executes it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stream in the crate.
pub type StreamRng = ChaCha8Rng;

/// Stream tag for feature-map draws.
pub const TAG_FEATURES: u64 = 0x6665_6174;
/// Stream tag for bootstrap seeds.
pub const TAG_BOOTSTRAP: u64 = 0x626f_6f74;
/// Stream tag for dataset generation.
pub const TAG_DATA: u64 = 0x6461_7461;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a seed and a path of indices into a new 64-bit seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Opens the stream identified by `seed` and `path`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, path))
}
