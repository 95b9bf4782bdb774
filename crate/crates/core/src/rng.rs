//! Seeded randomness.
//!
//! Every stream in the crate is a ChaCha8 generator (`rand_chacha`), which is
//! counter-based and reproducible across platforms. Standard normal variates
//! come from the ziggurat sampler of `rand_distr::StandardNormal`.
//!
//! Sub-seeds are derived from a parent seed and a label (or a counter) by
//! hashing both through FNV-1a and finishing with a SplitMix64 round, so a
//! single top-level integer determines an entire experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a labelled sub-seed, e.g. `derive_seed(seed, "noise")`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(seed ^ h)
}

/// Derives the `index`-th member of a counter family, e.g. one seed per band.
pub fn derive_indexed(seed: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive_seed(seed, label).wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

pub fn fill_standard_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f32]) {
    for v in out {
        *v = rng.sample::<f64, _>(StandardNormal) as f32;
    }
}
