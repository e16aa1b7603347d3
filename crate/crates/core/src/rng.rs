//! Seed plumbing.
//!
//! Every random decision in a run draws from its own ChaCha8 stream whose seed
//! is derived from the experiment seed plus a path of tags. Streams never
//! depend on how many numbers another stream consumed, so adding a phase to an
//! experiment cannot shift the randomness of any other phase.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_tag(tag: &str) -> u64 {
    // FNV-1a
    tag.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derives a child seed from `seed`, a string tag and a list of indices.
pub fn derive_seed(seed: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut s = splitmix64(seed ^ hash_tag(tag));
    for &i in indices {
        s = splitmix64(s ^ splitmix64(i.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    s
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
