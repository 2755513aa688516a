//! Deterministic random streams.
//!
//! Every noise source draws from its own ChaCha stream derived from the
//! episode seed, so switching one source off never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-generators of one episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    World = 0,
    InitialYaw = 1,
    Disturbance = 2,
    PositionNoise = 3,
    VelocityNoise = 4,
    Extrinsics = 5,
    ControllerTau = 6,
    DepthNoise = 7,
    Policy = 8,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of episode `index` under evaluation condition `condition`.
///
/// Depends only on its arguments, so every policy evaluated with the same
/// base seed sees the same worlds.
pub fn episode_seed(base: u64, condition: u64, index: u64) -> u64 {
    mix64(mix64(base ^ mix64(condition)) ^ index)
}
