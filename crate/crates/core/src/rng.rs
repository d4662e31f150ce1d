//! Reproducible random streams.
//!
//! All randomness comes from ChaCha20 (the `rand_chacha` implementation),
//! a counter-based generator. A stream is addressed by a 64-bit seed and a
//! 64-bit stream id: the seed is expanded into the 256-bit key with
//! `SeedableRng::seed_from_u64`, and the stream id selects ChaCha's nonce.
//! Replicate `i` of a run always draws from stream `i`, so results do not
//! depend on how replicates are scheduled across threads.

use rand::SeedableRng;
pub use rand_chacha::ChaCha20Rng as StreamRng;

/// Generator for stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child seed for nested randomness (e.g. bootstrap draws inside simulation
/// replicate `index`), via the SplitMix64 finalizer.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
