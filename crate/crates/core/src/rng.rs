//! Seeded randomness.
//!
//! Every random draw in the crate comes from [`SimRng`], which is ChaCha8
//! (`rand_chacha`) seeded through `SeedableRng::seed_from_u64`. A uniform
//! draw is `rand`'s standard `f64` in `[0, 1)` built from 53 random bits.
//! Independent streams for trials or protocol steps get sub-seeds from
//! [`derive_seed`], a SplitMix64 mix of the parent seed and the stream index,
//! so results never depend on the order in which streams are evaluated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// One SplitMix64 output step.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sub-seed for stream `index` under `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn uniform(rng: &mut SimRng) -> f64 {
    rng.random::<f64>()
}

/// Inverse-CDF pick: the first index whose cumulative probability exceeds
/// `u`. Zero-probability entries are never selected.
pub fn pick(probabilities: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last_nonzero = 0;
    for (k, &p) in probabilities.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last_nonzero = k;
        cumulative += p;
        if u < cumulative {
            return k;
        }
    }
    last_nonzero
}
