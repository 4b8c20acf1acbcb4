//! Counter-based sub-seed derivation.
//!
//! Every random quantity in an experiment is generated from a ChaCha stream
//! whose seed is `derive(master, domain, index)`. The derivation depends only
//! on its arguments, so realization `r` is reproducible regardless of batch
//! size, worker count, or the order in which jobs are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tag for channel realizations.
pub const DOMAIN_CHANNEL: u64 = 0x6368_616e;
/// Domain tag for random optimizer initializations.
pub const DOMAIN_INIT: u64 = 0x696e_6974;
/// Domain tag for per-(realization, SNR) optimizer seeds.
pub const DOMAIN_JOB: u64 = 0x006a_6f62;
/// Domain tag for Monte Carlo symbol draws.
pub const DOMAIN_SYMBOLS: u64 = 0x7379_6d62;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the sub-seed for item `index` of `domain` under `master`.
pub fn derive(master: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ domain) ^ index)
}

/// Seeded generator used everywhere in the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
