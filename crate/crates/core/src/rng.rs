//! Seed derivation: every simulated subsystem draws from its own ChaCha stream so that
//! adding, say, background tags never perturbs camera noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) mod streams {
    pub const DEPTH: u64 = 1;
    pub const CARRIER: u64 = 2;
    pub const TAG_READS: u64 = 3;
    pub const PHASE_OFFSET: u64 = 4;
    pub const BACKGROUND: u64 = 5;
    pub const SCENARIO: u64 = 6;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub(crate) fn mix(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(seed), |h, &p| splitmix64(h ^ p))
}

pub(crate) fn stream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, parts))
}

/// Deterministic uniform draw in `[0, 1)` keyed by `parts`.
pub(crate) fn unit(seed: u64, parts: &[u64]) -> f64 {
    (mix(seed, parts) >> 11) as f64 / (1u64 << 53) as f64
}
