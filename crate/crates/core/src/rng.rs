//! Seed splitting.
//!
//! Every random draw in a run comes from one root seed. A named sub-stream is
//! a ChaCha8 generator seeded with the root seed and switched to the stream
//! number `fnv1a64(name)`; indexed sub-streams hash `"{name}/{index}"`. Two
//! sub-streams with different names never share state, so e.g. the topology
//! of a network does not change when the signal generator draws more numbers.
//!
//! Names used by the crate: `topology`, `signal`, `dvs`, `scene`, `ga`,
//! `fitness/{i}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn stream(root: u64, name: &str) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(fnv1a64(name.as_bytes()));
    rng
}

pub fn indexed_stream(root: u64, name: &str, index: u64) -> Rng {
    stream(root, &format!("{name}/{index}"))
}

/// Derives a child seed (for handing a whole sub-system its own root).
pub fn child_seed(root: u64, name: &str, index: u64) -> u64 {
    use rand::RngCore;
    indexed_stream(root, name, index).next_u64()
}
