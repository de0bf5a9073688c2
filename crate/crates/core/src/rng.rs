//! Hierarchical seeding.
//!
//! Every stochastic consumer derives its own generator from the master seed
//! and an address path (run, region, particle, iteration, ...). Two consumers
//! with different paths never share a stream, and the stream a consumer sees
//! does not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Address tags that keep sibling consumers apart.
pub mod tag {
    pub const INIT: u64 = 0x1001;
    pub const RESAMPLE: u64 = 0x1002;
    pub const NOISE: u64 = 0x1003;
    pub const REGION: u64 = 0x1004;
    pub const ENV: u64 = 0x1005;
    pub const RESTART: u64 = 0x1006;
    pub const POPULATION: u64 = 0x1007;
    pub const SEED: u64 = 0x1008;
    pub const HARVEST: u64 = 0x1009;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with an address path into a new 64-bit seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0xA5A5_5A5A))))
}

/// Generator for the substream at `path` below `seed`.
pub fn substream(seed: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, path))
}
