//! Counter-based random streams.
//!
//! A stream is ChaCha8 keyed by the master seed with the ChaCha stream id set
//! to a block index, so block `k` sees the same numbers no matter which
//! worker draws it or in which order blocks run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// SplitMix64 finaliser applied to `master ^ index * golden`; used to give
/// independent experiments their own master seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)`.
pub fn uniform(rng: &mut StreamRng) -> f64 {
    rng.random::<f64>()
}
