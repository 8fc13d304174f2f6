//! Deterministic seed derivation.
//!
//! Every randomized step in the pipeline draws from its own ChaCha20 stream
//! whose 64-bit seed is derived from the run's master seed plus a list of
//! labels identifying the step (bucket name, fold number, tree index, ...).
//! Derivation is a splitmix64 chain over the label parts, with strings
//! hashed by FNV-1a first. The scheme is stable across platforms and
//! releases: changing it invalidates recorded manifests.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// One component of a derivation path.
#[derive(Debug, Clone, Copy)]
pub enum SeedPart<'a> {
    Label(&'a str),
    Index(u64),
}

impl<'a> From<&'a str> for SeedPart<'a> {
    fn from(s: &'a str) -> Self {
        SeedPart::Label(s)
    }
}

impl From<u64> for SeedPart<'_> {
    fn from(v: u64) -> Self {
        SeedPart::Index(v)
    }
}

impl From<usize> for SeedPart<'_> {
    fn from(v: usize) -> Self {
        SeedPart::Index(v as u64)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Derives a child seed from `master` and a path of labels/indices.
pub fn derive_seed(master: u64, parts: &[SeedPart<'_>]) -> u64 {
    let mut state = splitmix64(master);
    for part in parts {
        let v = match part {
            SeedPart::Label(s) => fnv1a64(s.as_bytes()),
            SeedPart::Index(i) => *i,
        };
        state = splitmix64(state ^ v);
    }
    state
}

/// ChaCha20 stream for a derived seed.
pub fn rng_for(master: u64, parts: &[SeedPart<'_>]) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(derive_seed(master, parts))
}
