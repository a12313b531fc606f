//! Seed derivation and the sampling helpers used across the crate.
//!
//! Every random quantity in the pipeline descends from one base seed through
//! [`derive_seed`], so independent stages (trip simulation, GAN training,
//! autoencoder init, per-cell splits) draw from decoupled streams and any
//! stage can be re-run in isolation bit-for-bit.

use core::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fmath;

/// The deterministic generator used everywhere in this workspace.
pub type Rng64 = ChaCha8Rng;

/// Creates the generator for a derived stream.
pub fn stream_rng(base_seed: u64, stream: u64) -> Rng64 {
    Rng64::seed_from_u64(derive_seed(base_seed, stream))
}

/// Mixes a base seed with a stream index (splitmix64 finalizer).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Standard normal draw via the Box-Muller transform.
///
/// Two uniforms per draw; only the cosine branch is used so the number of
/// generator advances per sample is fixed.
pub fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    // gen::<f64>() is [0, 1); flip to (0, 1] so the log argument is nonzero.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    fmath::sqrt(-2.0 * fmath::ln(u1)) * fmath::cos(2.0 * PI * u2)
}

/// Poisson draw by Knuth's product-of-uniforms method; fine for the small
/// event rates used by the simulator.
pub fn poisson<R: RngCore>(rng: &mut R, lambda: f64) -> u32 {
    debug_assert!(lambda >= 0.0);
    if lambda <= 0.0 {
        return 0;
    }
    let threshold = fmath::exp(-lambda);
    let mut count = 0u32;
    let mut product: f64 = 1.0;
    loop {
        product *= 1.0 - rng.gen::<f64>();
        if product <= threshold {
            return count;
        }
        count += 1;
    }
}

/// Uniform draw from `[-scale, scale)`, the conventional small-uniform
/// parameter initialization.
pub fn uniform_sym<R: RngCore>(rng: &mut R, scale: f64) -> f64 {
    rng.gen_range(-scale..scale)
}
