//! Deterministic random substreams.
//!
//! Every parallel unit of work (an MCMC chain, a simulation replication, a LOO
//! fold) gets its own ChaCha stream keyed by the run seed and a stream id, so
//! results never depend on scheduling order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

/// Top-level stream for a seed.
pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Independent substream `id` of `seed`.
pub fn substream(seed: u64, id: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Derive a child seed from a parent seed and a tag using splitmix64 mixing.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
