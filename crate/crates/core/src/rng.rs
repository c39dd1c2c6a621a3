//! Seed derivation.
//!
//! Every random decision in the crate draws from a stream keyed by a small
//! tuple of integers (run seed, cell, timestep, user hash, ...). Streams are
//! independent of the order in which they are created, so parallel schedules
//! produce the same numbers as sequential ones.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Cheap to construct, so hot loops can open one stream per (run, cell, step).
pub type StreamRng = Xoshiro256PlusPlus;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a sequence of keys into one seed.
pub fn derive_seed(keys: &[u64]) -> u64 {
    keys.iter().fold(0x6a09_e667_f3bc_c909, |acc, &k| mix64(acc ^ mix64(k)))
}

pub fn stream(keys: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(keys))
}

/// FNV-1a over the bytes of a string; stable across platforms and releases.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// Domain tags keep streams for different purposes apart.
pub(crate) const TAG_INIT: u64 = 0x1001;
pub(crate) const TAG_CONTAGION: u64 = 0x1002;
pub(crate) const TAG_SCREEN: u64 = 0x1003;
pub(crate) const TAG_QUARANTINE: u64 = 0x1004;
pub(crate) const TAG_RUN: u64 = 0x1005;
pub(crate) const TAG_SYNTH_USER: u64 = 0x2001;
pub(crate) const TAG_SYNTH_CITY: u64 = 0x2002;
pub(crate) const TAG_SYNTH_POI: u64 = 0x2003;
pub(crate) const TAG_TELECOMMUTE: u64 = 0x3001;
pub(crate) const TAG_LOCKDOWN: u64 = 0x3002;
