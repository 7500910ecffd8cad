//! Deterministic random streams.
//!
//! Every simulation draws from [`SimRng`] (ChaCha8, portable and
//! reproducible across platforms). Trial `i` of a run with master seed `s`
//! uses seed [`derive_seed`]`(s, i)`, the `(i + 1)`-th output of a SplitMix64
//! generator started at `s`, so serial and parallel runs see identical
//! streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Generator for substream `index` under `master`.
pub fn substream(master: u64, index: u64) -> SimRng {
    seeded(derive_seed(master, index))
}
