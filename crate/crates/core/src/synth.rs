//! Synthetic data generators.
//!
//! Real spectromicroscopy stacks are modeled as a small number of materials,
//! each with a smooth spectral response and a smooth spatial abundance map:
//! `A[e,x,y] = Σ_m spectrum_m(e) · abundance_m(x,y)`, optionally plus noise.
//! The noiseless stack flattens to a matrix of rank at most the number of
//! materials, which is exactly the structure the completion algorithms
//! exploit. Tensors with a prescribed per-slice rank pattern in the
//! transform domain are also provided for exercising the slicewise
//! pipeline.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, split_seed};
use crate::tensor::{C64, Tensor3};
use crate::transform::Transform;

/// Recipe for a synthetic spectromicroscopy stack, oriented as
/// energy x rows x columns so mode-3 tubes follow the spatial scan
/// direction.
#[derive(Debug, Clone)]
pub struct PhantomSpec {
    /// Number of energy levels (mode 1).
    pub energies: usize,
    /// Spatial rows (mode 2).
    pub rows: usize,
    /// Spatial columns (mode 3).
    pub cols: usize,
    /// Number of materials; bounds the flattened rank.
    pub materials: usize,
    /// Noise magnitude relative to the clean stack: the additive noise is
    /// normalized so `‖noise‖_F = noise_sigma · ‖clean‖_F` exactly.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn new(energies: usize, rows: usize, cols: usize, materials: usize, seed: u64) -> Self {
        PhantomSpec { energies, rows, cols, materials, noise_sigma: 0.0, seed }
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }
}

/// Builds the phantom stack. The clean part is a fixed function of the seed,
/// so the same spec with `noise_sigma = 0` yields the noise-free truth of a
/// noisy phantom.
pub fn make_phantom(spec: &PhantomSpec) -> Result<Tensor3> {
    let (ne, nx, ny) = (spec.energies, spec.rows, spec.cols);
    if ne == 0 || nx == 0 || ny == 0 || spec.materials == 0 {
        return Err(Error::arg("make_phantom", "extents and material count must be positive"));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::arg("make_phantom", format!("noise_sigma = {}", spec.noise_sigma)));
    }

    let mut spec_rng = rng::rng_from_seed(split_seed(spec.seed, 0));
    let mut abund_rng = rng::rng_from_seed(split_seed(spec.seed, 1));

    // Smooth spectra: a baseline plus a few Gaussian absorption edges on a
    // normalized energy axis.
    let mut spectra = Vec::with_capacity(spec.materials);
    for _ in 0..spec.materials {
        let baseline = spec_rng.random_range(0.1..0.5);
        let bumps: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                let amp = spec_rng.random_range(0.5..1.5);
                let center = spec_rng.random_range(0.0..1.0);
                let width = spec_rng.random_range(0.03..0.15);
                (amp, center, width)
            })
            .collect();
        let denom = (ne - 1).max(1) as f64;
        let curve: Vec<f64> = (0..ne)
            .map(|i| {
                let e = i as f64 / denom;
                baseline
                    + bumps
                        .iter()
                        .map(|(a, c, w)| a * (-(e - c) * (e - c) / (2.0 * w * w)).exp())
                        .sum::<f64>()
            })
            .collect();
        spectra.push(curve);
    }

    // Nonnegative abundance maps: sums of spatial Gaussian blobs.
    let mut abundances = Vec::with_capacity(spec.materials);
    for _ in 0..spec.materials {
        let blobs: Vec<(f64, f64, f64, f64)> = (0..4)
            .map(|_| {
                let amp = abund_rng.random_range(0.3..1.0);
                let cx = abund_rng.random_range(0.0..nx as f64);
                let cy = abund_rng.random_range(0.0..ny as f64);
                let sigma = abund_rng.random_range(0.1..0.3) * nx.min(ny) as f64;
                (amp, cx, cy, sigma)
            })
            .collect();
        let map: Vec<f64> = (0..nx * ny)
            .map(|l| {
                let (x, y) = ((l % nx) as f64, (l / nx) as f64);
                blobs
                    .iter()
                    .map(|(a, cx, cy, s)| {
                        a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp()
                    })
                    .sum()
            })
            .collect();
        abundances.push(map);
    }

    let mut stack = Tensor3::from_fn(ne, nx, ny, |e, x, y| {
        let v: f64 = (0..spec.materials)
            .map(|m| spectra[m][e] * abundances[m][x + y * nx])
            .sum();
        C64::new(v, 0.0)
    });

    if spec.noise_sigma > 0.0 {
        let mut noise_rng = rng::rng_from_seed(split_seed(spec.seed, 2));
        let shape = Tensor3::from_fn(ne, nx, ny, |_, _, _| {
            C64::new(rng::gaussian(&mut noise_rng), 0.0)
        });
        let scale = spec.noise_sigma * stack.frobenius_norm() / shape.frobenius_norm();
        stack.axpy(C64::new(scale, 0.0), &shape);
    }
    Ok(stack)
}

/// Builds a tensor whose transform-domain frontal slice `k` has rank exactly
/// `ranks[k]` (with probability one): each slice is a product of Gaussian
/// factors, assembled in the transform domain and mapped back.
pub fn multirank_tensor(
    n1: usize,
    n2: usize,
    n3: usize,
    ranks: &[usize],
    transform: &Transform,
    seed: u64,
) -> Result<Tensor3> {
    if ranks.len() != n3 {
        return Err(Error::arg(
            "multirank_tensor",
            format!("{} ranks for n3 = {n3}", ranks.len()),
        ));
    }
    if let Some(&bad) = ranks.iter().find(|&&r| r > n1.min(n2)) {
        return Err(Error::arg(
            "multirank_tensor",
            format!("slice rank {bad} exceeds min(n1, n2) = {}", n1.min(n2)),
        ));
    }
    let mut hat = Tensor3::zeros(n1, n2, n3);
    for (k, &r) in ranks.iter().enumerate() {
        if r == 0 {
            continue;
        }
        let mut slice_rng = rng::rng_from_seed(split_seed(seed, k as u64));
        let a = rng::gaussian_matrix(&mut slice_rng, n1, r);
        let b = rng::gaussian_matrix(&mut slice_rng, r, n2);
        hat.set_frontal(k, &a.mul(&b));
    }
    transform.apply_inverse(&hat)
}
