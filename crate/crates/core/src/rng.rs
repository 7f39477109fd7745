//! Seed derivation.
//!
//! Independent work units (layers, replications, restarts, folds) each get
//! their own ChaCha stream keyed by `(seed, stream)`, so the order in which
//! they execute never changes what they draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// RNG for stream `stream` under master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive a child seed from a parent seed and a path of indices.
///
/// SplitMix64 finalizer applied along the path; distinct paths give
/// unrelated seeds.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut h = mix(seed ^ 0x5851_f42d_4c95_7f2d);
    for &p in path {
        h = mix(h ^ mix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
