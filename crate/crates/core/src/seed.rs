//! Deterministic derivation of independent RNG streams.
//!
//! Every consumer of randomness receives its own ChaCha stream keyed by a
//! master seed and a tuple of tags (round, parameter, client, ...), so the
//! result of a computation never depends on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const TAG_SELECT: u64 = 0x5e1e_c7;
pub const TAG_AGGREGATE: u64 = 0xa66e;
pub const TAG_CALIBRATE: u64 = 0xca11;
pub const TAG_SERVER: u64 = 0x5e4e;
pub const TAG_DATA: u64 = 0xda7a;
pub const TAG_PROBE: u64 = 0x940b;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mixes `tags` into `master`, yielding a new 64-bit seed.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(master: u64, tags: &[u64]) -> Rng {
    Rng::seed_from_u64(derive(master, tags))
}
