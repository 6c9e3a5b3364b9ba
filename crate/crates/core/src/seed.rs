//! Stable seed derivation.
//!
//! Seeds are combined with SplitMix64 so derived values do not depend on the
//! standard library's hasher, which is not stable across releases.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds an ordered list of integers into one seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5EED_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Seed for repetition `rep` of an experiment.
pub fn repetition_seed(master_seed: u64, rep: u64) -> u64 {
    derive_seed(&[master_seed, rep])
}

/// Per-example smoothing seed: distinct across epochs and examples, stable across runs.
pub fn example_seed(run_seed: u64, epoch: u64, example_index: u64) -> u64 {
    derive_seed(&[run_seed, epoch, example_index])
}
