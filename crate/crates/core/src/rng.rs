//! Seeding for reproducible Monte Carlo.
//!
//! All randomness comes from xoshiro256++. Replicate `i` of a run with master
//! seed `s` is driven by a generator seeded with
//! `splitmix64(s ^ splitmix64(i))`, so replicates can be computed in any
//! order, on any number of threads, with identical results.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SimRng = Xoshiro256PlusPlus;

/// One round of the splitmix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under master seed `seed`.
pub fn stream_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, index: u64) -> SimRng {
    rng_from_seed(stream_seed(seed, index))
}
