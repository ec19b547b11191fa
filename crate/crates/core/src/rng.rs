//! Seeding helpers. Every random decision in the pipeline flows from a
//! `ChaCha8Rng` seeded here, so runs are reproducible across platforms.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

pub fn seeded(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// 64-bit FNV-1a; stable identifier hash for string sample ids.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Per-sample seed: `global ^ hash(sample_id)`.
pub fn derive_seed(global: u64, sample_id: &str) -> u64 {
    global ^ fnv1a(sample_id.as_bytes())
}

/// Per-sample seed with an extra stream tag, so different stages drawing for
/// the same sample do not share a stream.
pub fn derive_stream(global: u64, sample_id: &str, stream: &str) -> u64 {
    derive_seed(global, sample_id) ^ fnv1a(stream.as_bytes()).rotate_left(17)
}
