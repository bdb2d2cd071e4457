//! Seed-derivation helpers.
//!
//! Every run owns one master seed; independent sub-streams (human placement,
//! robot sign directions, obstacle placement) are derived from it so that
//! changing the obstacle regime does not perturb the human sample, keeping
//! regimes comparable across seeds.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sub-stream identifiers. Values are part of the determinism contract.
pub const STREAM_HUMANS: u64 = 1;
pub const STREAM_ROBOT_DIRECTIONS: u64 = 2;
pub const STREAM_OBSTACLES: u64 = 3;

/// SplitMix64 finalizer; a stable, platform-independent integer mix.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic RNG for one sub-stream of a master seed.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream)))
}
