//! Deterministic seed derivation.
//!
//! Every stochastic routine takes an explicit seed; nested loops (trials,
//! grid points, nodes) derive child seeds through [`derive_seed`] so results
//! do not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of indices into a child seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |acc, &p| {
        splitmix64(acc ^ splitmix64(p.wrapping_add(0x5851_F42D)))
    })
}

pub fn rng_from(base: u64, path: &[u64]) -> SimRng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}
