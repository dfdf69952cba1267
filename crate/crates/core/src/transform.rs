//! Mode-3 transforms `M = c·W` with `W` unitary and `c != 0`.
//!
//! Applying a transform maps a tensor into the domain where tensor-tensor
//! products act slicewise: `Â = fold3(M · unfold3(A))`. Four families are
//! supported:
//!
//! * `dft` — unnormalized forward DFT (`c = sqrt(n3)`), the classic
//!   circulant-algebra choice; the inverse carries the `1/n3` factor.
//! * `dct` — orthonormal DCT-II (`c = 1`), real and orthogonal.
//! * `identity` — facewise products, no mixing along mode 3.
//! * `from_matrix` — any user matrix that is unitary up to scale.
//!
//! A supplied matrix is validated at construction: `MᴴM` must equal `c²·I`
//! to a relative `1e-10`, where `c² = ‖M‖_F² / n3`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{C64, Matrix, Tensor3};

const UNITARY_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Dft,
    Dct,
    Identity,
    Explicit,
}

/// An invertible mode-3 transform together with its scale `c`.
#[derive(Clone)]
pub struct Transform {
    kind: TransformKind,
    n3: usize,
    /// `c > 0` with `M = c·W`, `W` unitary.
    c: f64,
    /// Materialized `M` and `M⁻¹` for the matrix-applied kinds.
    mat: Option<Arc<(Matrix, Matrix)>>,
    /// FFT plans for the DFT kind.
    fft: Option<Arc<dyn Fft<f64>>>,
    ifft: Option<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform")
            .field("kind", &self.kind)
            .field("n3", &self.n3)
            .field("c", &self.c)
            .finish()
    }
}

impl Transform {
    /// Unnormalized forward DFT along mode 3; `c = sqrt(n3)`.
    pub fn dft(n3: usize) -> Transform {
        assert!(n3 > 0, "transform length must be positive");
        let mut planner = FftPlanner::new();
        Transform {
            kind: TransformKind::Dft,
            n3,
            c: (n3 as f64).sqrt(),
            mat: None,
            fft: Some(planner.plan_fft_forward(n3)),
            ifft: Some(planner.plan_fft_inverse(n3)),
        }
    }

    /// Orthonormal DCT-II along mode 3; real, `c = 1`.
    pub fn dct(n3: usize) -> Transform {
        assert!(n3 > 0, "transform length must be positive");
        let n = n3 as f64;
        let m = Matrix::from_fn(n3, n3, |k, s| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            C64::new(scale * (PI * (2.0 * s as f64 + 1.0) * k as f64 / (2.0 * n)).cos(), 0.0)
        });
        let inv = m.conj_transpose();
        Transform {
            kind: TransformKind::Dct,
            n3,
            c: 1.0,
            mat: Some(Arc::new((m, inv))),
            fft: None,
            ifft: None,
        }
    }

    /// No mixing along mode 3; products act facewise.
    pub fn identity(n3: usize) -> Transform {
        assert!(n3 > 0, "transform length must be positive");
        Transform { kind: TransformKind::Identity, n3, c: 1.0, mat: None, fft: None, ifft: None }
    }

    /// Wraps an explicit `n3 x n3` matrix, rejecting anything that is not
    /// unitary up to scale.
    pub fn from_matrix(m: Matrix) -> Result<Transform> {
        if m.rows() != m.cols() || m.rows() == 0 {
            return Err(Error::dims(
                "Transform::from_matrix",
                format!("{}x{} (want square, nonempty)", m.rows(), m.cols()),
            ));
        }
        let n3 = m.rows();
        let c_sq = m.norm_sq() / n3 as f64;
        if c_sq <= 0.0 {
            return Err(Error::NotUnitary { deviation: 1.0 });
        }
        let gram = m.conj_transpose().mul(&m);
        let mut deviation: f64 = 0.0;
        for i in 0..n3 {
            for j in 0..n3 {
                let expect = if i == j { C64::new(c_sq, 0.0) } else { C64::ZERO };
                deviation = deviation.max((gram.at(i, j) - expect).norm());
            }
        }
        if deviation > UNITARY_REL_TOL * c_sq {
            return Err(Error::NotUnitary { deviation: deviation / c_sq });
        }
        let mut inv = m.conj_transpose();
        inv.scale(C64::new(1.0 / c_sq, 0.0));
        Ok(Transform {
            kind: TransformKind::Explicit,
            n3,
            c: c_sq.sqrt(),
            mat: Some(Arc::new((m, inv))),
            fft: None,
            ifft: None,
        })
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn n3(&self) -> usize {
        self.n3
    }

    /// The scale `c` in `M = c·W`.
    pub fn scale(&self) -> f64 {
        self.c
    }

    /// `|c|²`; the inner-product normalization factor.
    pub fn scale_sq(&self) -> f64 {
        self.c * self.c
    }

    /// Materializes `M` as a dense matrix.
    pub fn matrix(&self) -> Matrix {
        match self.kind {
            TransformKind::Identity => Matrix::identity(self.n3),
            TransformKind::Dft => {
                let n = self.n3 as f64;
                Matrix::from_fn(self.n3, self.n3, |k, s| {
                    let angle = -2.0 * PI * (k * s) as f64 / n;
                    C64::new(angle.cos(), angle.sin())
                })
            }
            TransformKind::Dct | TransformKind::Explicit => {
                self.mat.as_ref().expect("matrix kinds cache M").0.clone()
            }
        }
    }

    fn check_len(&self, op: &'static str, len: usize) -> Result<()> {
        if len != self.n3 {
            return Err(Error::dims(op, format!("mode-3 extent {len}, transform length {}", self.n3)));
        }
        Ok(())
    }

    /// `Â = fold3(M · unfold3(A))`.
    pub fn apply(&self, t: &Tensor3) -> Result<Tensor3> {
        self.transform_tensor(t, false)
    }

    /// `A = fold3(M⁻¹ · unfold3(Â))`.
    pub fn apply_inverse(&self, t: &Tensor3) -> Result<Tensor3> {
        self.transform_tensor(t, true)
    }

    /// Transforms a single mode-3 tube.
    pub fn apply_tube(&self, tube: &[C64]) -> Result<Vec<C64>> {
        self.check_len("Transform::apply_tube", tube.len())?;
        let mut out = tube.to_vec();
        self.tube_in_place(&mut out, false);
        Ok(out)
    }

    pub fn apply_tube_inverse(&self, tube: &[C64]) -> Result<Vec<C64>> {
        self.check_len("Transform::apply_tube_inverse", tube.len())?;
        let mut out = tube.to_vec();
        self.tube_in_place(&mut out, true);
        Ok(out)
    }

    fn transform_tensor(&self, t: &Tensor3, inverse: bool) -> Result<Tensor3> {
        let (n1, n2, n3) = t.dims();
        self.check_len(
            if inverse { "Transform::apply_inverse" } else { "Transform::apply" },
            n3,
        )?;
        if self.kind == TransformKind::Identity || t.is_empty() {
            return Ok(t.clone());
        }
        // Tube-major layout makes every tube contiguous; transform the
        // columns independently and fold back.
        let mut unfolded = t.unfold3();
        par::for_each_chunk_mut(unfolded.data_mut(), n3, |_, tube| {
            self.tube_in_place(tube, inverse);
        });
        Tensor3::fold3(&unfolded, n1, n2)
    }

    fn tube_in_place(&self, tube: &mut [C64], inverse: bool) {
        match self.kind {
            TransformKind::Identity => {}
            TransformKind::Dft => {
                if inverse {
                    let plan = self.ifft.as_ref().unwrap();
                    let mut scratch = vec![C64::ZERO; plan.get_inplace_scratch_len()];
                    plan.process_with_scratch(tube, &mut scratch);
                    let inv_n = 1.0 / self.n3 as f64;
                    for v in tube.iter_mut() {
                        *v *= inv_n;
                    }
                } else {
                    let plan = self.fft.as_ref().unwrap();
                    let mut scratch = vec![C64::ZERO; plan.get_inplace_scratch_len()];
                    plan.process_with_scratch(tube, &mut scratch);
                }
            }
            TransformKind::Dct | TransformKind::Explicit => {
                let pair = self.mat.as_ref().unwrap();
                let m = if inverse { &pair.1 } else { &pair.0 };
                let mut out = vec![C64::ZERO; self.n3];
                for (s, &x) in tube.iter().enumerate() {
                    if x == C64::ZERO {
                        continue;
                    }
                    for (o, &mk) in out.iter_mut().zip(m.col(s)) {
                        *o += mk * x;
                    }
                }
                tube.copy_from_slice(&out);
            }
        }
    }
}
