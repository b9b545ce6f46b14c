//! Seeded, splittable randomness.
//!
//! Every random draw in the crate comes from `ChaCha8Rng`. A substream is
//! identified by a master seed plus a path of integers such as
//! `(d_index, model_index)`; the path is folded into ChaCha's 64-bit stream
//! id, so substreams never overlap and do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_id(path: &[u64]) -> u64 {
    path.iter()
        .fold(0x5151_5e45_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Generator for substream `path` of `seed`.
pub fn substream(seed: u64, path: &[u64]) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(path));
    rng
}

/// Named top-level streams, so e.g. a dataset and the models sampled
/// against it never share draws.
pub mod streams {
    pub const DATASET: u64 = 1;
    pub const MODELS: u64 = 2;
    pub const GROUND_TRUTH: u64 = 3;
    pub const TEST_SET: u64 = 4;
    pub const QUERY_POINT: u64 = 5;
    pub const PROPOSALS: u64 = 6;
}
