//! Seed handling for reproducible parallel runs.
//!
//! Every stochastic routine derives its generators from one master seed:
//! question `k` uses ChaCha stream `k`, shared parameters use
//! [`SHARED_STREAM`]. Child seeds for grid cells, replicates and folds come
//! from [`derive_seed`], a SplitMix64 finalizer over `master` and a label.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream reserved for draws of parameters shared across questions.
pub const SHARED_STREAM: u64 = u64::MAX;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for the `labels` path below `master`.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    labels.iter().fold(splitmix64(master), |acc, &l| {
        splitmix64(acc ^ splitmix64(l))
    })
}
