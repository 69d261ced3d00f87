//! Master-seed fan-out.
//!
//! Every random decision in the pipeline draws from a stream keyed by
//! `(master seed, stream kind, index...)`, so results never depend on the order
//! (or thread) in which entities are generated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Identity = 1,
    HardGroup = 2,
    Cohort = 3,
    Texture = 4,
    Scene = 5,
    Path = 6,
    Schedule = 7,
    Enlarge = 8,
    Select = 9,
    Batch = 10,
    Corpus = 11,
    Appearance = 12,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a 64-bit key from a seed, a stream kind and an index path.
pub fn derive_key(seed: u64, stream: Stream, path: &[u64]) -> u64 {
    let mut h = mix64(seed ^ GOLDEN.wrapping_mul(stream as u64 + 1));
    for (depth, &p) in path.iter().enumerate() {
        h = mix64(h ^ mix64(p.wrapping_add(GOLDEN.wrapping_mul(depth as u64 + 2))));
    }
    h
}

pub fn stream(seed: u64, kind: Stream, path: &[u64]) -> StreamRng {
    let key = derive_key(seed, kind, path);
    let mut bytes = [0u8; 32];
    let mut s = key;
    for chunk in bytes.chunks_mut(8) {
        s = mix64(s.wrapping_add(GOLDEN));
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}
