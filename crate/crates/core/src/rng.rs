//! Seeding discipline for everything random.
//!
//! All randomness flows through ChaCha8, a counter-based generator that is
//! reproducible across platforms and rayon schedules. Independent consumers
//! (mask generation, factor initialization, per-slice solvers, sweep cells)
//! never share a generator; each derives its own seed with [`split_seed`] so
//! that results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::tensor::{C64, Matrix, Tensor3};

/// SplitMix64 finalizer; decorrelates consecutive lane indices.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed for an independent stream, e.g. one per frontal slice or
/// per sweep cell.
pub fn split_seed(base: u64, lane: u64) -> u64 {
    splitmix64(base ^ splitmix64(lane).rotate_left(17))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draw.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Complex draw with independent standard normal parts.
pub fn complex_gaussian(rng: &mut ChaCha8Rng) -> C64 {
    let re = gaussian(rng);
    let im = gaussian(rng);
    C64::new(re, im)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<C64> {
    (0..len).map(|_| complex_gaussian(rng)).collect()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_col_major(rows, cols, gaussian_vec(rng, rows * cols)).unwrap()
}

pub fn gaussian_tensor(rng: &mut ChaCha8Rng, n1: usize, n2: usize, n3: usize) -> Tensor3 {
    Tensor3::from_data(n1, n2, n3, gaussian_vec(rng, n1 * n2 * n3)).unwrap()
}
