//! Seeded random streams.
//!
//! One root seed fans out into independent ChaCha8 streams selected by a
//! stream index, so chunk k of any Monte Carlo loop draws the same numbers
//! regardless of thread count.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Rng = ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 20_140_917;

/// Stream `index` derived from `seed`.
pub fn stream(seed: u64, index: u64) -> Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

/// Uniform on the open interval (0, 1).
pub fn open01(rng: &mut Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub fn std_normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn rademacher(rng: &mut Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}
