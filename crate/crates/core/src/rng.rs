//! Seed derivation.
//!
//! Every random quantity in the simulator is drawn from a ChaCha8 stream
//! derived from the run seed plus a path of tags (stream kind, node index,
//! UE index, ...). Two draws with different tag paths are independent, and a
//! draw never depends on evaluation order, so parallel and sequential runs
//! produce identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DATA: u64 = 0x0da7a;
pub const NOISE: u64 = 0x0415e;
pub const REFLECTORS: u64 = 0x0ef1;
pub const SHADOWING: u64 = 0x05ad0;
pub const BEAM: u64 = 0x0bea3;
pub const DESIRED: u64 = 0x0de51;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a seed with a tag path into a new 64-bit seed.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

/// A ChaCha8 generator for the given seed and tag path.
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut s = derive(seed, tags);
    for chunk in key.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
