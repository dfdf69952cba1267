//! Order-3 tensor and dense matrix storage.
//!
//! Both containers hold `Complex64` entries (real data is stored with zero
//! imaginary parts). A [`Tensor3`] keeps each frontal slice column-major and
//! the slices contiguous in `k`, so the linear position of `(i, j, k)` is
//! `i + j*n1 + k*n1*n2`. A [`Matrix`] is column-major. With this layout
//! `flatten`, `unflatten`, `twist`, and `squeeze` are pure reinterpretations
//! of the same buffer and therefore exact inverses of each other.

use crate::error::{Error, Result};

pub type C64 = num_complex::Complex64;

/// Dense complex matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![C64::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, C64::ONE);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Wraps an existing column-major buffer; `data.len()` must be
    /// `rows * cols`.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "Matrix::from_col_major",
                format!("{} values for a {rows}x{cols} matrix", data.len()),
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> C64 {
        assert!(i < self.rows && j < self.cols, "matrix index ({i}, {j}) out of bounds for {}x{}", self.rows, self.cols);
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(i < self.rows && j < self.cols, "matrix index ({i}, {j}) out of bounds for {}x{}", self.rows, self.cols);
        self.data[i + j * self.rows] = v;
    }

    /// Column `j` as a contiguous slice.
    #[inline]
    pub fn col(&self, j: usize) -> &[C64] {
        assert!(j < self.cols, "column {j} out of bounds for {}x{}", self.rows, self.cols);
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        assert!(j < self.cols, "column {j} out of bounds for {}x{}", self.rows, self.cols);
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// `self * rhs`.
    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert!(
            self.cols == rhs.rows,
            "matrix product dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let out_col = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for l in 0..self.cols {
                let b = rhs.data[l + j * rhs.rows];
                if b == C64::ZERO {
                    continue;
                }
                let a_col = &self.data[l * self.rows..(l + 1) * self.rows];
                for (o, &a) in out_col.iter_mut().zip(a_col) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Conjugate transpose `Aᴴ`.
    pub fn conj_transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.at(j, i).conj())
    }

    pub fn scale(&mut self, s: C64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: C64, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Reinterprets an `n1 x n3` matrix as an `n1 x 1 x n3` tensor whose
    /// frontal slices are the matrix columns.
    pub fn twist(&self) -> Tensor3 {
        Tensor3 { n1: self.rows, n2: 1, n3: self.cols, data: self.data.clone() }
    }
}

/// Dense complex order-3 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n1: usize,
    n2: usize,
    n3: usize,
    data: Vec<C64>,
}

impl Tensor3 {
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        Tensor3 { n1, n2, n3, data: vec![C64::ZERO; n1 * n2 * n3] }
    }

    pub fn from_fn(n1: usize, n2: usize, n3: usize, mut f: impl FnMut(usize, usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n1 * n2 * n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    data.push(f(i, j, k));
                }
            }
        }
        Tensor3 { n1, n2, n3, data }
    }

    /// Wraps an existing buffer laid out slice-by-slice, column-major within
    /// each frontal slice.
    pub fn from_data(n1: usize, n2: usize, n3: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n1 * n2 * n3 {
            return Err(Error::dims(
                "Tensor3::from_data",
                format!("{} values for a {n1}x{n2}x{n3} tensor", data.len()),
            ));
        }
        Ok(Tensor3 { n1, n2, n3, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + j * self.n1 + k * self.n1 * self.n2
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> C64 {
        assert!(
            i < self.n1 && j < self.n2 && k < self.n3,
            "tensor index ({i}, {j}, {k}) out of bounds for {}x{}x{}",
            self.n1, self.n2, self.n3
        );
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn try_at(&self, i: usize, j: usize, k: usize) -> Option<C64> {
        if i < self.n1 && j < self.n2 && k < self.n3 {
            Some(self.data[self.offset(i, j, k)])
        } else {
            None
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: C64) {
        assert!(
            i < self.n1 && j < self.n2 && k < self.n3,
            "tensor index ({i}, {j}, {k}) out of bounds for {}x{}x{}",
            self.n1, self.n2, self.n3
        );
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    // --- slice views ---------------------------------------------------

    /// Frontal slice `A[:, :, k]` as a contiguous view.
    pub fn frontal_slice(&self, k: usize) -> &[C64] {
        assert!(k < self.n3, "frontal slice {k} out of bounds for n3 = {}", self.n3);
        let s = self.n1 * self.n2;
        &self.data[k * s..(k + 1) * s]
    }

    pub fn frontal_slice_mut(&mut self, k: usize) -> &mut [C64] {
        assert!(k < self.n3, "frontal slice {k} out of bounds for n3 = {}", self.n3);
        let s = self.n1 * self.n2;
        &mut self.data[k * s..(k + 1) * s]
    }

    /// Frontal slice `A[:, :, k]` copied into an `n1 x n2` matrix.
    pub fn frontal(&self, k: usize) -> Matrix {
        Matrix { rows: self.n1, cols: self.n2, data: self.frontal_slice(k).to_vec() }
    }

    pub fn set_frontal(&mut self, k: usize, m: &Matrix) {
        assert_eq!((m.rows, m.cols), (self.n1, self.n2), "frontal slice shape mismatch");
        self.frontal_slice_mut(k).copy_from_slice(&m.data);
    }

    /// Horizontal slice `A[i, :, :]` as an `n2 x n3` matrix.
    pub fn horizontal(&self, i: usize) -> Matrix {
        Matrix::from_fn(self.n2, self.n3, |j, k| self.at(i, j, k))
    }

    /// Lateral slice `A[:, j, :]` as an `n1 x n3` matrix.
    pub fn lateral(&self, j: usize) -> Matrix {
        Matrix::from_fn(self.n1, self.n3, |i, k| self.at(i, j, k))
    }

    /// Mode-3 tube `A[i, j, :]`.
    pub fn tube(&self, i: usize, j: usize) -> Vec<C64> {
        (0..self.n3).map(|k| self.at(i, j, k)).collect()
    }

    // --- reshapes -------------------------------------------------------

    /// Horizontal concatenation of the frontal slices into an
    /// `n1 x (n2*n3)` matrix. With this crate's layout the buffer is reused
    /// verbatim, so `unflatten` recovers the tensor bit for bit.
    pub fn flatten(&self) -> Matrix {
        Matrix { rows: self.n1, cols: self.n2 * self.n3, data: self.data.clone() }
    }

    /// Inverse of [`Tensor3::flatten`]; `m.cols()` must be divisible by `n3`.
    pub fn unflatten(m: &Matrix, n3: usize) -> Result<Tensor3> {
        if n3 == 0 || m.cols % n3 != 0 {
            return Err(Error::dims(
                "Tensor3::unflatten",
                format!("{} columns do not split into {n3} slices", m.cols),
            ));
        }
        Ok(Tensor3 { n1: m.rows, n2: m.cols / n3, n3, data: m.data.clone() })
    }

    /// Drops the singleton second mode of an `n1 x 1 x n3` tensor, undoing
    /// [`Matrix::twist`].
    pub fn squeeze(&self) -> Result<Matrix> {
        if self.n2 != 1 {
            return Err(Error::dims("Tensor3::squeeze", format!("n2 = {} (want 1)", self.n2)));
        }
        Ok(Matrix { rows: self.n1, cols: self.n3, data: self.data.clone() })
    }

    /// Mode-3 unfolding: an `n3 x (n1*n2)` matrix whose column
    /// `l = i + j*n1` is the tube `A[i, j, :]`.
    pub fn unfold3(&self) -> Matrix {
        let nt = self.n1 * self.n2;
        let mut data = vec![C64::ZERO; self.n3 * nt];
        for k in 0..self.n3 {
            let slice = &self.data[k * nt..(k + 1) * nt];
            for (l, &v) in slice.iter().enumerate() {
                data[k + l * self.n3] = v;
            }
        }
        Matrix { rows: self.n3, cols: nt, data }
    }

    /// Inverse of [`Tensor3::unfold3`] for the given first two extents.
    pub fn fold3(m: &Matrix, n1: usize, n2: usize) -> Result<Tensor3> {
        if m.cols != n1 * n2 {
            return Err(Error::dims(
                "Tensor3::fold3",
                format!("{} columns for extents {n1}x{n2}", m.cols),
            ));
        }
        let n3 = m.rows;
        let nt = n1 * n2;
        let mut data = vec![C64::ZERO; nt * n3];
        for l in 0..nt {
            for k in 0..n3 {
                data[l + k * nt] = m.data[k + l * n3];
            }
        }
        Ok(Tensor3 { n1, n2, n3, data })
    }

    // --- numerics --------------------------------------------------------

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Largest `|Im|` over all entries; zero means the tensor is real-valued.
    pub fn max_imag_abs(&self) -> f64 {
        self.data.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Keeps only the real parts, zeroing all imaginary parts.
    pub fn into_real(mut self) -> Tensor3 {
        for v in &mut self.data {
            v.im = 0.0;
        }
        self
    }

    pub fn scale(&mut self, s: C64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: C64, other: &Tensor3) {
        assert_eq!(self.dims(), other.dims(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        assert_eq!(self.dims(), other.dims(), "sub shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Tensor3 { n1: self.n1, n2: self.n2, n3: self.n3, data }
    }
}
