//! Stable seed derivation. Streams depend only on the inputs, never on
//! scheduling, so results are identical for any worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// RNG for one experiment: seeded by `(master_seed, key)`, stream `index`.
pub fn experiment_rng(master_seed: u64, key: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master_seed ^ fnv1a(key.as_bytes())));
    rng.set_stream(index);
    rng
}

/// RNG for one bootstrap trial.
pub fn trial_rng(resample_seed: u64, n_s: usize, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(resample_seed ^ splitmix64(n_s as u64)));
    rng.set_stream(trial);
    rng
}
