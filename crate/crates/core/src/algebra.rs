//! The tensor-tensor product algebra induced by a mode-3 transform.
//!
//! For tensors `A` (n1 x p x n3) and `B` (p x n2 x n3) and a transform `M`,
//! the product `A ⋆ B` multiplies corresponding frontal slices in the
//! transform domain and maps the result back:
//!
//! ```text
//! (A ⋆ B)^ₖ = Âₖ · B̂ₖ,   k = 1..n3
//! ```
//!
//! Everything else here is built on that product: the conjugate transpose,
//! the identity tensor, the tensor trace and inner product, the slicewise
//! SVD with its rank profiles, and the global singular-value truncation used
//! by the slicewise completion pipeline.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::par;
use crate::tensor::{C64, Matrix, Tensor3};
use crate::transform::Transform;

/// Relative cutoff (times the largest singular value) below which a singular
/// value counts as zero in rank computations.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

// --- products and contractions -----------------------------------------

/// `A ⋆ B`: slicewise product in the transform domain.
pub fn mprod(a: &Tensor3, b: &Tensor3, t: &Transform) -> Result<Tensor3> {
    let (n1, p, n3) = a.dims();
    let (pb, n2, n3b) = b.dims();
    if p != pb || n3 != n3b {
        return Err(Error::dims(
            "mprod",
            format!("{n1}x{p}x{n3} times {pb}x{n2}x{n3b}"),
        ));
    }
    let a_hat = t.apply(a)?;
    let b_hat = t.apply(b)?;
    let slices = par::map_indexed(n3, |k| a_hat.frontal(k).mul(&b_hat.frontal(k)));
    let mut out = Tensor3::zeros(n1, n2, n3);
    for (k, s) in slices.iter().enumerate() {
        out.set_frontal(k, s);
    }
    t.apply_inverse(&out)
}

/// `Aᴴ`: conjugate-transposes every frontal slice in the transform domain.
pub fn conj_transpose(a: &Tensor3, t: &Transform) -> Result<Tensor3> {
    let (n1, n2, n3) = a.dims();
    let a_hat = t.apply(a)?;
    let mut out = Tensor3::zeros(n2, n1, n3);
    for k in 0..n3 {
        out.set_frontal(k, &a_hat.frontal(k).conj_transpose());
    }
    t.apply_inverse(&out)
}

/// The `n x n x n3` identity of the product: every transform-domain slice is
/// the identity matrix.
pub fn identity_tensor(n: usize, t: &Transform) -> Tensor3 {
    let n3 = t.n3();
    let mut hat = Tensor3::zeros(n, n, n3);
    for k in 0..n3 {
        for i in 0..n {
            hat.set(i, i, k, C64::ONE);
        }
    }
    t.apply_inverse(&hat).expect("identity tensor extents always match")
}

/// Tensor trace: the sum of the traces of all transform-domain slices.
pub fn ttrace(a: &Tensor3, t: &Transform) -> Result<C64> {
    let (n1, n2, _) = a.dims();
    if n1 != n2 {
        return Err(Error::dims("ttrace", format!("slices are {n1}x{n2}, need square")));
    }
    let hat = t.apply(a)?;
    let mut tr = C64::ZERO;
    for k in 0..hat.dims().2 {
        for i in 0..n1 {
            tr += hat.at(i, i, k);
        }
    }
    Ok(tr)
}

/// Inner product `(1/|c|²)·tTr(A ⋆ Bᴴ)`, evaluated entrywise in the
/// transform domain. The `1/|c|²` factor makes `tip(A, A) = ‖A‖_F²` for
/// every admissible transform, so norms computed through the product algebra
/// agree with plain Frobenius norms.
pub fn tip(a: &Tensor3, b: &Tensor3, t: &Transform) -> Result<C64> {
    if a.dims() != b.dims() {
        return Err(Error::dims("tip", format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    let a_hat = t.apply(a)?;
    let b_hat = t.apply(b)?;
    let dot: C64 = a_hat.data().iter().zip(b_hat.data()).map(|(x, y)| x * y.conj()).sum();
    Ok(dot / t.scale_sq())
}

// --- slicewise SVD -------------------------------------------------------

/// Slicewise singular value decomposition `A = U ⋆ S ⋆ Vᴴ`.
///
/// `U` (n1 x n1 x n3) and `V` (n2 x n2 x n3) have unitary transform-domain
/// slices; `S` (n1 x n2 x n3) has nonnegative, nonincreasing diagonals
/// there. The decomposition is stored in the spatial domain together with
/// the transform that defines it.
#[derive(Debug, Clone)]
pub struct Tsvdm {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
    pub transform: Transform,
    /// Singular values of each transform-domain slice, nonincreasing.
    sing: Vec<Vec<f64>>,
}

impl Tsvdm {
    /// `U ⋆ S ⋆ Vᴴ`.
    pub fn reconstruct(&self) -> Result<Tensor3> {
        let sv = mprod(&self.s, &conj_transpose(&self.v, &self.transform)?, &self.transform)?;
        mprod(&self.u, &sv, &self.transform)
    }

    /// Per-slice singular values in the transform domain.
    pub fn singular_values(&self) -> &[Vec<f64>] {
        &self.sing
    }
}

pub(crate) fn to_na(m: &Matrix) -> DMatrix<C64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.data())
}

pub(crate) fn from_na(d: &DMatrix<C64>) -> Matrix {
    Matrix::from_col_major(d.nrows(), d.ncols(), d.as_slice().to_vec()).unwrap()
}

/// Thin SVD of one complex matrix: `(U, σ, V)` with `U: m x r`, `V: n x r`,
/// `r = min(m, n)`, singular values nonincreasing.
pub(crate) fn matrix_svd(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let svd = to_na(m).svd(true, true);
    let u = from_na(&svd.u.expect("u requested"));
    let vt = svd.v_t.expect("v_t requested");
    let v = from_na(&vt.adjoint());
    (u, svd.singular_values.as_slice().to_vec(), v)
}

/// Extends a matrix with orthonormal columns to a full unitary, keeping the
/// given columns untouched. Uses greedy modified Gram-Schmidt over the
/// standard basis with reorthogonalization.
pub(crate) fn complete_unitary(thin: &Matrix) -> Matrix {
    let m = thin.rows();
    let k0 = thin.cols();
    let mut q = Matrix::zeros(m, m);
    for j in 0..k0 {
        q.col_mut(j).copy_from_slice(thin.col(j));
    }
    let project = |q: &Matrix, filled: usize, v: &mut [C64]| {
        for j in 0..filled {
            let col = q.col(j);
            let coef: C64 = col.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, &a) in v.iter_mut().zip(col) {
                *x -= coef * a;
            }
        }
    };
    for filled in k0..m {
        // candidate basis vector with the largest residual stays best
        // conditioned; at least one residual norm² is >= (m - filled)/m
        let mut best: Option<(f64, Vec<C64>)> = None;
        for c in 0..m {
            let mut v = vec![C64::ZERO; m];
            v[c] = C64::ONE;
            project(&q, filled, &mut v);
            let norm_sq: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            if best.as_ref().is_none_or(|(b, _)| norm_sq > *b) {
                best = Some((norm_sq, v));
            }
        }
        let (_, mut v) = best.expect("m > 0");
        project(&q, filled, &mut v); // reorthogonalize
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for (dst, x) in q.col_mut(filled).iter_mut().zip(&v) {
            *dst = x / norm;
        }
    }
    q
}

/// Slicewise SVD in the transform domain.
pub fn tsvdm(a: &Tensor3, t: &Transform) -> Result<Tsvdm> {
    let (n1, n2, n3) = a.dims();
    let hat = t.apply(a)?;
    let parts = par::map_indexed(n3, |k| {
        let (u_thin, sig, v_thin) = matrix_svd(&hat.frontal(k));
        let u = if u_thin.cols() < n1 { complete_unitary(&u_thin) } else { u_thin };
        let v = if v_thin.cols() < n2 { complete_unitary(&v_thin) } else { v_thin };
        (u, sig, v)
    });

    let mut u = Tensor3::zeros(n1, n1, n3);
    let mut s = Tensor3::zeros(n1, n2, n3);
    let mut v = Tensor3::zeros(n2, n2, n3);
    let mut sing = Vec::with_capacity(n3);
    for (k, (uk, sig, vk)) in parts.into_iter().enumerate() {
        u.set_frontal(k, &uk);
        v.set_frontal(k, &vk);
        for (i, &val) in sig.iter().enumerate() {
            s.set(i, i, k, C64::new(val, 0.0));
        }
        sing.push(sig);
    }
    Ok(Tsvdm {
        u: t.apply_inverse(&u)?,
        s: t.apply_inverse(&s)?,
        v: t.apply_inverse(&v)?,
        transform: t.clone(),
        sing,
    })
}

// --- rank profiles -------------------------------------------------------

/// The three ranks of the slicewise SVD: the number of nonzero singular
/// tubes (`t_rank`), the per-slice ranks (`multirank`), and their sum
/// (`implicit`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankProfile {
    pub t_rank: usize,
    pub multirank: Vec<usize>,
    pub implicit: usize,
}

impl RankProfile {
    /// Builds the profile from per-slice singular values, counting values
    /// above `tol` times the global maximum.
    pub fn from_singular_values(sing: &[Vec<f64>], tol: f64) -> RankProfile {
        let sigma_max = sing.iter().flatten().copied().fold(0.0, f64::max);
        let cut = tol * sigma_max;
        let multirank: Vec<usize> =
            sing.iter().map(|s| s.iter().filter(|&&v| v > cut).count()).collect();
        let t_rank = multirank.iter().copied().max().unwrap_or(0);
        let implicit = multirank.iter().sum();
        RankProfile { t_rank, multirank, implicit }
    }
}

/// Rank profile of a tensor under a transform; `tol` is relative to the
/// largest singular value across all slices (see [`DEFAULT_RANK_TOL`]).
pub fn ranks(a: &Tensor3, t: &Transform, tol: f64) -> Result<RankProfile> {
    let hat = t.apply(a)?;
    let n3 = a.dims().2;
    let sing = par::map_indexed(n3, |k| {
        let slice = to_na(&hat.frontal(k));
        slice.singular_values().as_slice().to_vec()
    });
    Ok(RankProfile::from_singular_values(&sing, tol))
}

// --- global singular-value truncation -----------------------------------

/// Outcome of the global energy truncation: how many leading values to keep
/// in each slice.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTruncation {
    /// Per-slice keep counts ρ*ₖ.
    pub keep: Vec<usize>,
    /// The smallest kept value; values strictly below were dropped.
    pub threshold: f64,
    /// Total number of kept values.
    pub kept_values: usize,
}

/// Keeps the smallest set of leading singular values whose cumulative
/// squared sum exceeds `gamma` times the total, pooling values across all
/// slices.
///
/// Values are pooled and sorted nonincreasing into `w`; with
/// `J = min { j : Σ_{l<=j} w_l² > γ·Σ w² }`, every value strictly below
/// `w_J` is dropped (ties at `w_J` survive). When no prefix satisfies the
/// bound — exactly the `γ = 1` case — all nonzero values are kept, so the
/// multirank is unchanged.
pub fn truncate_energy(sing: &[Vec<f64>], gamma: f64) -> Result<EnergyTruncation> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::arg("truncate_energy", format!("gamma = {gamma}, want (0, 1]")));
    }
    let mut pooled: Vec<f64> = sing.iter().flatten().copied().collect();
    if pooled.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::arg("truncate_energy", "singular values must be finite and >= 0"));
    }
    pooled.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = pooled.iter().map(|v| v * v).sum();

    let keep_all_positive = |sing: &[Vec<f64>]| {
        let keep: Vec<usize> = sing.iter().map(|s| s.iter().filter(|&&v| v > 0.0).count()).collect();
        let kept_values = keep.iter().sum();
        EnergyTruncation { keep, threshold: 0.0, kept_values }
    };

    if total == 0.0 {
        return Ok(keep_all_positive(sing));
    }

    let mut cum = 0.0;
    let mut w_j = None;
    for &v in &pooled {
        cum += v * v;
        if cum > gamma * total {
            w_j = Some(v);
            break;
        }
    }
    let Some(threshold) = w_j else {
        // only reachable at γ = 1 (or within rounding of it): keep every
        // nonzero value
        return Ok(keep_all_positive(sing));
    };

    let keep: Vec<usize> = sing
        .iter()
        .map(|s| s.iter().filter(|&&v| v >= threshold && v > 0.0).count())
        .collect();
    let kept_values = keep.iter().sum();
    Ok(EnergyTruncation { keep, threshold, kept_values })
}
