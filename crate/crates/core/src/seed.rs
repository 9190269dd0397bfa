//! Counter-based seed splitting.
//!
//! Every seeded operation derives its generator from the single run seed, a
//! per-operation domain tag and a list of counters, so streams never overlap
//! and any one of them can be replayed in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags for the independent streams.
pub mod domain {
    pub const DEV_SPLIT: u64 = 1;
    pub const REBALANCE: u64 = 2;
    pub const MEM_UNIFORM: u64 = 3;
    pub const PROBE_INIT: u64 = 4;
    pub const PROBE_SHUFFLE: u64 = 5;
    pub const PROBE_DROPOUT: u64 = 6;
    pub const PREQUENTIAL_ORDER: u64 = 7;
    pub const PREQUENTIAL_BLOCK: u64 = 8;
    pub const SYNTH_CORPUS: u64 = 9;
    pub const SYNTH_EMBED: u64 = 10;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed, a domain tag and counters into one 64-bit stream key.
pub fn mix(seed: u64, domain: u64, counters: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ splitmix64(domain));
    for &c in counters {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(0x2545_F491_4F6C_DD1D)));
    }
    h
}

/// Independent generator for `(seed, domain, counters)`.
pub fn stream(seed: u64, domain: u64, counters: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mix(seed, domain, counters));
    rng
}
