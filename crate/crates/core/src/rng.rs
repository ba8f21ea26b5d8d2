//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by a master seed and a stream counter, so results never depend on
//! scheduling or wall-clock entropy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a seed with a tag so nested components get unrelated seeds.
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic fold assignment: a seeded shuffle dealt round-robin.
pub fn fold_ids(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, 0xF01D));
    let mut ids = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        ids[i] = pos % folds;
    }
    ids
}
