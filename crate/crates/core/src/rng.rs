//! Deterministic seeding: a splitmix64-style mixer derives child seeds from
//! (parent seed, tag) pairs, and every random stream is a ChaCha8 generator
//! seeded from such a derived value. The whole experiment tree is therefore
//! reproducible from one master seed, independent of thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
fn finalize(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

/// Derive a child seed from a parent seed and a tag. tag = 0 is not the
/// identity, so sibling branches never collide with their parent.
pub fn mix(seed: u64, tag: u64) -> u64 {
    finalize(seed.wrapping_add(tag.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Random stream for a derived seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
