//! Seeded random streams. Every consumer draws from its own ChaCha stream,
//! keyed by `(master seed, domain)` and indexed by a caller-chosen stream id,
//! so adding draws in one place never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub(crate) const DOMAIN_PROBE: u64 = 0x7072_6f62_6500_0001;
pub(crate) const DOMAIN_DATASET: u64 = 0x6461_7461_0000_0002;
pub(crate) const DOMAIN_BATCH: u64 = 0x6261_7463_6800_0003;
pub(crate) const DOMAIN_ATTACK: u64 = 0x6174_7461_636b_0004;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub(crate) fn stream(seed: u64, domain: u64, id: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(splitmix64(seed ^ domain));
    rng.set_stream(id);
    rng
}

/// Packs `(iteration, index)` into one stream id.
pub(crate) fn pair_id(iteration: u64, index: u64) -> u64 {
    (iteration << 32) ^ index
}
