//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 keyed by a user seed.
//! Independent streams for (generation, index) pairs share the key and use
//! distinct 64-bit stream ids, so results do not depend on evaluation order
//! or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// The stream for `(seed, a, b)`; `a` and `b` are typically a generation and
/// an index within it.
pub fn stream(seed: u64, a: u64, b: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(splitmix64(splitmix64(a) ^ b.rotate_left(17)));
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
