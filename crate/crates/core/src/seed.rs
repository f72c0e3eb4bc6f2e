//! Per-task seed derivation.
//!
//! `mix(master, index)` runs SplitMix64's finalizer over the master seed, xors
//! in the index and finalizes again. Replication `r` can therefore be rerun
//! alone from `(master, r)` without replaying earlier replications.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 step: advance by the golden gamma and finalize.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for task `index` under `master`.
pub fn mix(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index)
}
