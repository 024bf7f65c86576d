//! Positional seed derivation.
//!
//! Seeds are never drawn from a shared generator. Each consumer derives its
//! own seed from the master seed and its grid coordinates with a SplitMix64
//! finalizer, so adding or removing grid cells leaves every other cell's
//! randomness unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tag for train/test splits.
pub const SPLIT_STREAM: u64 = 0x5350_4c49_5400_0001;
/// Stream tag for synthetic data rows.
pub const SYNTH_STREAM: u64 = 0x5359_4e54_4800_0002;

/// SplitMix64 finalizer: a bijective 64-bit avalanche mix.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a seed for grid coordinate `(a, b)` under `master`.
///
/// `mix(m, a, b) = sm(sm(sm(m) ^ a) ^ b)` where `sm` is [`splitmix64`].
pub fn mix(master: u64, a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ a) ^ b)
}

/// Seed key for a missing level. Uses the bit pattern of the level itself
/// rather than its position in the grid.
pub fn level_key(level: f64) -> u64 {
    level.to_bits()
}

/// Seed for the mask of `(level, repetition)`.
pub fn mask_seed(master: u64, level: f64, repetition: usize) -> u64 {
    mix(master, level_key(level), repetition as u64)
}

/// Seed for the probe split of a repetition.
pub fn split_seed(master: u64, repetition: usize) -> u64 {
    mix(master, SPLIT_STREAM, repetition as u64)
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference SplitMix64 generator seeded with 0:
        // the generator adds the golden gamma before mixing, as here.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn mix_is_positional() {
        let a = mask_seed(7, 0.3, 2);
        assert_eq!(a, mask_seed(7, 0.3, 2));
        assert_ne!(a, mask_seed(7, 0.3, 3));
        assert_ne!(a, mask_seed(7, 0.4, 2));
        assert_ne!(a, mask_seed(8, 0.3, 2));
        assert_ne!(split_seed(7, 0), mask_seed(7, 0.0, 0));
    }
}
