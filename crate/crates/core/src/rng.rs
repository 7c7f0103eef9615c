//! Seed derivation for replicate-parallel Monte Carlo.
//!
//! Every random object is a pure function of a 64-bit seed. Replicate `i`
//! of a run seeded with `master` uses `derive_seed(master, i)`, so results do
//! not depend on how replicates are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags keep independent draws of one replicate apart.
pub mod stream {
    pub const FIELD: u64 = 0x6669_656c_64;
    pub const PATH: u64 = 0x7061_7468;
    pub const BRIDGE: u64 = 0x6272_6964_6765;
    pub const POINT: u64 = 0x706f_696e_74;
    pub const COUPLING: u64 = 0x636f_7570;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `(seed, index)` into a fresh, well-separated seed.
#[inline]
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
