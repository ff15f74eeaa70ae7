//! Portable random streams.
//!
//! Every random quantity in the crate is drawn from [`Xoshiro256PlusPlus`]
//! seeded through `seed_from_u64` (SplitMix64 expansion), so results are
//! identical on every platform.
//!
//! * Uniform `[0, 1)`: the top 53 bits of `next_u64`, times `2^-53`.
//! * Standard normal: Box–Muller on two uniforms, `u1` mapped to `(0, 1]`;
//!   both outputs of a pair are used, cosine branch first.

pub use rand_core::RngCore;
use rand_core::SeedableRng;
pub use rand_xoshiro::Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the `index`-th child stream of `seed`. Depends only on the pair.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn stream(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

#[inline]
pub fn uniform01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Box–Muller standard normal generator with a one-value cache.
#[derive(Debug, Clone)]
pub struct Normal {
    spare: Option<f64>,
}

impl Normal {
    pub fn new() -> Self {
        Normal { spare: None }
    }

    pub fn sample<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = 1.0 - uniform01(rng);
        let u2 = uniform01(rng);
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = core::f64::consts::TAU * u2;
        self.spare = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }
}

impl Default for Normal {
    fn default() -> Self {
        Self::new()
    }
}
