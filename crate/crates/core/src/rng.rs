//! Deterministic per-item random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream for item `index` of a run seeded with `seed`.
///
/// Each item gets its own ChaCha stream, so items can be generated in any
/// order or in parallel and still come out identical.
pub fn child_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
