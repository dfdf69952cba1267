//! Observation masks for matrix and tensor completion.
//!
//! Three generators are provided:
//!
//! * `bernoulli_*` — every entry observed independently with probability `p`.
//! * `raster` — whole mode-3 tubes observed: each `(i, j)` pair is drawn
//!   independently with probability `p` and contributes the full tube
//!   `(i, j, :)`. This mimics line-scan acquisition and, unlike Bernoulli
//!   sampling, leaves entire horizontal slices empty with nonnegligible
//!   probability at small `p`.
//! * `robust_raster` — raster sampling with the empty-slice failure mode
//!   engineered away. Tubes are drawn in rounds; each round visits every row
//!   index `i` exactly once in a fresh random order while a single column
//!   cursor advances cyclically across draws, so each round pairs random
//!   rows with a sliding window of columns. A draw that lands on a tube the
//!   row already owns slides forward to the row's next free column. Drawing
//!   stops after `ceil(p·n1·n2)` tube slots, so the realized tube count is
//!   exact, `p = 1` covers the tensor completely, every row is observed as
//!   soon as one round completes, and both row and column coverage stay
//!   balanced — the per-slice footprint looks like Bernoulli sampling with
//!   its worst fluctuations removed.
//!
//! Tube-complete masks commute with mode-3 transforms, which is what makes
//! the slicewise completion pipeline sound; [`SamplingPattern::slice_mask`]
//! extracts the common per-slice mask of such patterns.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;
use crate::tensor::{C64, Matrix, Tensor3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternKind {
    Bernoulli,
    Raster,
    RobustRaster,
    /// Loaded from a file or constructed from an explicit mask.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternDims {
    Matrix { rows: usize, cols: usize },
    Tensor { n1: usize, n2: usize, n3: usize },
}

impl PatternDims {
    pub fn len(&self) -> usize {
        match *self {
            PatternDims::Matrix { rows, cols } => rows * cols,
            PatternDims::Tensor { n1, n2, n3 } => n1 * n2 * n3,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// An observation mask in storage order, together with how it was made.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingPattern {
    kind: PatternKind,
    dims: PatternDims,
    seed: u64,
    mask: Vec<bool>,
}

/// The common frontal-slice mask of a tube-complete tensor pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceMask {
    n1: usize,
    n2: usize,
    mask: Vec<bool>, // column-major
}

fn check_p(op: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::arg(op, format!("sampling ratio p = {p}, want [0, 1]")));
    }
    Ok(())
}

impl SamplingPattern {
    /// Independent entrywise sampling of a `rows x cols` matrix.
    pub fn bernoulli_matrix(rows: usize, cols: usize, p: f64, seed: u64) -> Result<Self> {
        check_p("bernoulli_matrix", p)?;
        let mut rng = rng_from_seed(seed);
        let mask = (0..rows * cols).map(|_| rng.random::<f64>() < p).collect();
        Ok(SamplingPattern {
            kind: PatternKind::Bernoulli,
            dims: PatternDims::Matrix { rows, cols },
            seed,
            mask,
        })
    }

    /// Independent entrywise sampling of an `n1 x n2 x n3` tensor.
    pub fn bernoulli_tensor(n1: usize, n2: usize, n3: usize, p: f64, seed: u64) -> Result<Self> {
        check_p("bernoulli_tensor", p)?;
        let mut rng = rng_from_seed(seed);
        let mask = (0..n1 * n2 * n3).map(|_| rng.random::<f64>() < p).collect();
        Ok(SamplingPattern {
            kind: PatternKind::Bernoulli,
            dims: PatternDims::Tensor { n1, n2, n3 },
            seed,
            mask,
        })
    }

    /// Whole-tube sampling: each `(i, j)` pair is drawn independently with
    /// probability `p` and contributes the complete tube `(i, j, :)`.
    pub fn raster(n1: usize, n2: usize, n3: usize, p: f64, seed: u64) -> Result<Self> {
        check_p("raster", p)?;
        let mut rng = rng_from_seed(seed);
        let mut tube_mask = vec![false; n1 * n2];
        for slot in tube_mask.iter_mut() {
            *slot = rng.random::<f64>() < p;
        }
        Ok(SamplingPattern {
            kind: PatternKind::Raster,
            dims: PatternDims::Tensor { n1, n2, n3 },
            seed,
            mask: tile_tubes(&tube_mask, n3),
        })
    }

    /// Raster sampling that cannot leave a horizontal slice empty once
    /// `ceil(p·n1·n2) >= n1`: rounds of row permutations paired with a
    /// cyclically advancing column cursor (see the module docs).
    pub fn robust_raster(n1: usize, n2: usize, n3: usize, p: f64, seed: u64) -> Result<Self> {
        check_p("robust_raster", p)?;
        let mut rng = rng_from_seed(seed);
        let total_tubes = n1 * n2;
        let budget = ((p * total_tubes as f64).ceil() as usize).min(total_tubes);

        let mut tube_mask = vec![false; total_tubes];
        let mut rows: Vec<usize> = (0..n1).collect();
        let mut cursor = if budget > 0 { rng.random_range(0..n2) } else { 0 };
        let mut drawn = 0;
        while drawn < budget {
            rows.shuffle(&mut rng);
            for &i in &rows {
                if drawn == budget {
                    break;
                }
                // each completed round leaves every row with one more tube,
                // so a free column always exists while drawn < n1 * n2
                let mut j = cursor;
                while tube_mask[i + j * n1] {
                    j = (j + 1) % n2;
                }
                tube_mask[i + j * n1] = true;
                cursor = (cursor + 1) % n2;
                drawn += 1;
            }
        }
        Ok(SamplingPattern {
            kind: PatternKind::RobustRaster,
            dims: PatternDims::Tensor { n1, n2, n3 },
            seed,
            mask: tile_tubes(&tube_mask, n3),
        })
    }

    /// Wraps an explicit mask tensor; entries with nonzero modulus count as
    /// observed.
    pub fn from_mask_tensor(t: &Tensor3) -> Self {
        let (n1, n2, n3) = t.dims();
        SamplingPattern {
            kind: PatternKind::External,
            dims: PatternDims::Tensor { n1, n2, n3 },
            seed: 0,
            mask: t.data().iter().map(|v| *v != C64::ZERO).collect(),
        }
    }

    pub fn from_mask_matrix(m: &Matrix) -> Self {
        SamplingPattern {
            kind: PatternKind::External,
            dims: PatternDims::Matrix { rows: m.rows(), cols: m.cols() },
            seed: 0,
            mask: m.data().iter().map(|v| *v != C64::ZERO).collect(),
        }
    }

    pub fn kind(&self) -> PatternKind {
        self.kind
    }

    pub fn dims(&self) -> PatternDims {
        self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Number of observed entries.
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Observed fraction `|Ω| / (total entries)`.
    pub fn realized_ratio(&self) -> f64 {
        if self.mask.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.mask.len() as f64
        }
    }

    /// Whether every mode-3 tube is either fully observed or fully missing.
    pub fn is_tube_complete(&self) -> bool {
        match self.dims {
            PatternDims::Matrix { .. } => false,
            PatternDims::Tensor { n1, n2, n3 } => {
                let nt = n1 * n2;
                (0..nt).all(|l| {
                    let first = self.mask[l];
                    (1..n3).all(|k| self.mask[l + k * nt] == first)
                })
            }
        }
    }

    /// The common frontal-slice mask of a tube-complete pattern. Masking
    /// with such a pattern commutes with any mode-3 transform, so the same
    /// `n1 x n2` mask applies to every transform-domain slice.
    pub fn slice_mask(&self) -> Result<SliceMask> {
        let PatternDims::Tensor { n1, n2, .. } = self.dims else {
            return Err(Error::NotTubeComplete);
        };
        if !self.is_tube_complete() {
            return Err(Error::NotTubeComplete);
        }
        Ok(SliceMask { n1, n2, mask: self.mask[..n1 * n2].to_vec() })
    }

    /// Zeroes the unobserved entries of a tensor.
    pub fn project_tensor(&self, t: &Tensor3) -> Result<Tensor3> {
        let (n1, n2, n3) = t.dims();
        if self.dims != (PatternDims::Tensor { n1, n2, n3 }) {
            return Err(Error::dims("project_tensor", format!("{:?} mask on {n1}x{n2}x{n3}", self.dims)));
        }
        let mut out = t.clone();
        for (v, &keep) in out.data_mut().iter_mut().zip(&self.mask) {
            if !keep {
                *v = C64::ZERO;
            }
        }
        Ok(out)
    }

    /// Zeroes the unobserved entries of a matrix.
    pub fn project_matrix(&self, m: &Matrix) -> Result<Matrix> {
        if self.dims != (PatternDims::Matrix { rows: m.rows(), cols: m.cols() }) {
            return Err(Error::dims(
                "project_matrix",
                format!("{:?} mask on {}x{}", self.dims, m.rows(), m.cols()),
            ));
        }
        let mut out = m.clone();
        for (v, &keep) in out.data_mut().iter_mut().zip(&self.mask) {
            if !keep {
                *v = C64::ZERO;
            }
        }
        Ok(out)
    }

    /// Reinterprets a tensor pattern as a mask on the flattened
    /// `n1 x (n2*n3)` matrix; the storage order is shared, so the mask bits
    /// are reused verbatim.
    pub fn flatten(&self) -> SamplingPattern {
        match self.dims {
            PatternDims::Matrix { .. } => self.clone(),
            PatternDims::Tensor { n1, n2, n3 } => SamplingPattern {
                kind: self.kind,
                dims: PatternDims::Matrix { rows: n1, cols: n2 * n3 },
                seed: self.seed,
                mask: self.mask.clone(),
            },
        }
    }

    /// The mask as a 0/1 tensor, for serialization.
    pub fn to_tensor(&self) -> Result<Tensor3> {
        let PatternDims::Tensor { n1, n2, n3 } = self.dims else {
            return Err(Error::arg("to_tensor", "pattern has matrix dims"));
        };
        let data = self.mask.iter().map(|&b| if b { C64::ONE } else { C64::ZERO }).collect();
        Tensor3::from_data(n1, n2, n3, data)
    }

    pub fn to_matrix(&self) -> Result<Matrix> {
        let PatternDims::Matrix { rows, cols } = self.dims else {
            return Err(Error::arg("to_matrix", "pattern has tensor dims"));
        };
        let data = self.mask.iter().map(|&b| if b { C64::ONE } else { C64::ZERO }).collect();
        Matrix::from_col_major(rows, cols, data)
    }
}

fn tile_tubes(tube_mask: &[bool], n3: usize) -> Vec<bool> {
    let mut mask = Vec::with_capacity(tube_mask.len() * n3);
    for _ in 0..n3 {
        mask.extend_from_slice(tube_mask);
    }
    mask
}

impl SliceMask {
    pub fn dims(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.mask[i + j * self.n1]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// Applies the mask to every frontal slice of a tensor.
    pub fn project_slicewise(&self, t: &Tensor3) -> Result<Tensor3> {
        let (n1, n2, n3) = t.dims();
        if (n1, n2) != (self.n1, self.n2) {
            return Err(Error::dims(
                "project_slicewise",
                format!("{}x{} mask on {n1}x{n2}x{n3}", self.n1, self.n2),
            ));
        }
        let mut out = t.clone();
        let nt = n1 * n2;
        for k in 0..n3 {
            for (v, &keep) in out.data_mut()[k * nt..(k + 1) * nt].iter_mut().zip(&self.mask) {
                if !keep {
                    *v = C64::ZERO;
                }
            }
        }
        Ok(out)
    }

    /// Zeroes masked-out entries of a single slice matrix.
    pub fn project_matrix(&self, m: &Matrix) -> Result<Matrix> {
        if (m.rows(), m.cols()) != (self.n1, self.n2) {
            return Err(Error::dims(
                "SliceMask::project_matrix",
                format!("{}x{} mask on {}x{}", self.n1, self.n2, m.rows(), m.cols()),
            ));
        }
        let mut out = m.clone();
        for (v, &keep) in out.data_mut().iter_mut().zip(&self.mask) {
            if !keep {
                *v = C64::ZERO;
            }
        }
        Ok(out)
    }

    /// The mask as a matrix sampling pattern.
    pub fn to_pattern(&self) -> SamplingPattern {
        SamplingPattern {
            kind: PatternKind::External,
            dims: PatternDims::Matrix { rows: self.n1, cols: self.n2 },
            seed: 0,
            mask: self.mask.clone(),
        }
    }
}
