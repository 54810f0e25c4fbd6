//! Seeded random streams.
//!
//! A master seed expands into independent named streams so that, e.g.,
//! turning learning off does not shift the placement or traffic draws.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Drop = 1,
    Placement = 2,
    Shadowing = 3,
    Traffic = 4,
    Exploration = 5,
    WeightInit = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(parent ^ splitmix64(stream as u64)) ^ splitmix64(index.wrapping_add(0x5851_F42D)))
}

pub fn stream(parent: u64, stream: Stream, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(parent, stream, index))
}

/// Uniform in the open interval (0, 1).
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

pub fn exponential<R: RngCore + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    -mean * math::ln(open_unit(rng))
}

/// Box-Muller; one of the pair is discarded to keep the stream position a
/// pure function of the number of draws.
pub fn normal<R: RngCore + ?Sized>(rng: &mut R, mean: f64, sigma: f64) -> f64 {
    let u1 = open_unit(rng);
    let u2: f64 = rng.gen();
    let radius = math::sqrt(-2.0 * math::ln(u1));
    mean + sigma * radius * math::cos(2.0 * core::f64::consts::PI * u2)
}
