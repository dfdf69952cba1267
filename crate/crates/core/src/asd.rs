//! Matrix completion by alternating steepest descent with exact line search.
//!
//! The iterate is kept in factored form `Z = X·Y` with `X: n1 x r` and
//! `Y: r x N`. Each iteration takes one steepest-descent half-step in `X`
//! (holding `Y` fixed) and one in `Y`, each with the exactly minimizing step
//! size. Writing `R = D - P_Ω(X·Y)` and `G = R·Yᴴ` (the negative gradient),
//! the optimal step is `η = ‖G‖_F² / ‖P_Ω(G·Y)‖_F²`, after which the
//! residual is updated in place as `R ← R - η·P_Ω(G·Y)` instead of being
//! recomputed. All per-iteration work beyond the `O((n1+N)·r)` factor
//! updates touches only observed entries, so an iteration costs `O(|Ω|·r)`.
//!
//! [`looped_asd`] wraps the solver in a rank-incremental loop with
//! cross-validation: the observed set is split into folds, ranks `1..=r_max`
//! are trained each on all-but-one fold with the previous factors (plus a
//! rescaled Gaussian column/row) as warm start, and the held-out errors form
//! a curve whose knee selects the completion rank. The last factors are
//! SVD-projected to that rank and polished on the full observed set.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::algebra::{from_na, matrix_svd, to_na};
use crate::error::{Error, Result};
use crate::knee::{knee_detect, KneeMethod};
use crate::rng::{self, split_seed};
use crate::sampling::{PatternDims, SamplingPattern};
use crate::tensor::{C64, Matrix};

/// Width of the stall window: the run stops when the relative residual has
/// changed by less than the stall tolerance over this many iterations.
pub const STALL_WINDOW: usize = 50;

/// The residual is recomputed exactly every this many iterations to bound
/// floating-point drift of the cheap update.
pub const RESIDUAL_REFRESH_PERIOD: usize = 100;

/// A factored iterate `Z = X·Y`.
#[derive(Debug, Clone)]
pub struct FactorPair {
    pub x: Matrix,
    pub y: Matrix,
}

impl FactorPair {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.cols() != y.rows() {
            return Err(Error::dims(
                "FactorPair::new",
                format!("{}x{} times {}x{}", x.rows(), x.cols(), y.rows(), y.cols()),
            ));
        }
        Ok(FactorPair { x, y })
    }

    /// The rank-0 pair, standing for the zero matrix.
    pub fn empty(rows: usize, cols: usize) -> Self {
        FactorPair { x: Matrix::zeros(rows, 0), y: Matrix::zeros(0, cols) }
    }

    /// Standard complex Gaussian factors.
    pub fn gaussian(rows: usize, cols: usize, r: usize, seed: u64) -> Self {
        let mut rx = rng::rng_from_seed(split_seed(seed, 0));
        let mut ry = rng::rng_from_seed(split_seed(seed, 1));
        FactorPair {
            x: rng::gaussian_matrix(&mut rx, rows, r),
            y: rng::gaussian_matrix(&mut ry, r, cols),
        }
    }

    pub fn rank(&self) -> usize {
        self.x.cols()
    }

    pub fn product(&self) -> Matrix {
        self.x.mul(&self.y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AsdConfig {
    pub max_iters: usize,
    pub tol_residual: f64,
    pub tol_stall: f64,
    /// Used only when the solver draws its own starting point.
    pub seed: u64,
}

impl Default for AsdConfig {
    fn default() -> Self {
        AsdConfig { max_iters: 5000, tol_residual: 1e-4, tol_stall: 1e-6, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Relative residual fell below the residual tolerance.
    Converged,
    /// Relative residual moved less than the stall tolerance over the window.
    Stalled,
    /// Iteration budget exhausted.
    MaxIters,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::Stalled => "stalled",
            StopReason::MaxIters => "max-iters",
        }
    }
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub relative_residual: f64,
    pub eta_x: f64,
    pub eta_y: f64,
}

#[derive(Debug, Clone)]
pub struct AsdOutcome {
    pub factors: FactorPair,
    pub stop: StopReason,
    pub iters: usize,
    pub relative_residual: f64,
    pub trace: Vec<TraceRow>,
}

/// Observed-entry structure in compressed-sparse-column form, shared by all
/// kernels that complete against the same mask.
#[derive(Debug, Clone)]
pub(crate) struct OmegaCsc {
    pub rows: usize,
    pub cols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
}

impl OmegaCsc {
    pub fn from_mask(rows: usize, cols: usize, mask: &[bool]) -> OmegaCsc {
        assert_eq!(mask.len(), rows * cols, "mask length");
        let mut col_ptr = Vec::with_capacity(cols + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for j in 0..cols {
            for i in 0..rows {
                if mask[i + j * rows] {
                    row_idx.push(i);
                }
            }
            col_ptr.push(row_idx.len());
        }
        OmegaCsc { rows, cols, col_ptr, row_idx }
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }
}

/// One factored completion problem restricted to its observed entries.
///
/// `X` is kept row-major and `Y` column-major so the r-length runs touched
/// per observed entry are contiguous. The residual and data live as values
/// aligned with the CSC index arrays.
#[derive(Debug, Clone)]
pub(crate) struct SparseKernel {
    omega: Arc<OmegaCsc>,
    r: usize,
    d_vals: Vec<C64>,
    r_vals: Vec<C64>,
    x: Vec<C64>,
    y: Vec<C64>,
    g_x: Vec<C64>,
    t_x: Vec<C64>,
    g_y: Vec<C64>,
    t_y: Vec<C64>,
    d_norm_sq: f64,
}

impl SparseKernel {
    pub fn new(omega: Arc<OmegaCsc>, d: &Matrix, init: &FactorPair) -> SparseKernel {
        let (rows, cols) = (omega.rows, omega.cols);
        assert_eq!((d.rows(), d.cols()), (rows, cols), "data/mask shape");
        assert_eq!(init.x.rows(), rows, "factor rows");
        assert_eq!(init.y.cols(), cols, "factor cols");
        let r = init.rank();

        let mut x = vec![C64::ZERO; rows * r];
        for l in 0..r {
            for (i, v) in init.x.col(l).iter().enumerate() {
                x[i * r + l] = *v;
            }
        }
        let y = init.y.data().to_vec();

        let nnz = omega.nnz();
        let mut d_vals = Vec::with_capacity(nnz);
        for j in 0..cols {
            let dj = d.col(j);
            for idx in omega.col_ptr[j]..omega.col_ptr[j + 1] {
                d_vals.push(dj[omega.row_idx[idx]]);
            }
        }
        let d_norm_sq = d_vals.iter().map(|z| z.norm_sqr()).sum();

        let mut kernel = SparseKernel {
            omega,
            r,
            d_vals,
            r_vals: vec![C64::ZERO; nnz],
            x,
            y,
            g_x: vec![C64::ZERO; rows * r],
            t_x: vec![C64::ZERO; nnz],
            g_y: vec![C64::ZERO; r * cols],
            t_y: vec![C64::ZERO; nnz],
            d_norm_sq,
        };
        kernel.refresh();
        kernel
    }

    /// Computes `G_x = R·Yᴴ` and `T_x = P_Ω(G_x·Y)`; returns their squared
    /// Frobenius norms `(‖G_x‖², ‖T_x‖²)`.
    pub fn stage_x(&mut self) -> (f64, f64) {
        let r = self.r;
        self.g_x.fill(C64::ZERO);
        for j in 0..self.omega.cols {
            let (lo, hi) = (self.omega.col_ptr[j], self.omega.col_ptr[j + 1]);
            if lo == hi {
                continue;
            }
            let yj = &self.y[j * r..(j + 1) * r];
            for idx in lo..hi {
                let i = self.omega.row_idx[idx];
                let rv = self.r_vals[idx];
                let row = &mut self.g_x[i * r..(i + 1) * r];
                for l in 0..r {
                    row[l] += rv * yj[l].conj();
                }
            }
        }
        let g_sq: f64 = self.g_x.iter().map(|z| z.norm_sqr()).sum();

        let mut t_sq = 0.0;
        for j in 0..self.omega.cols {
            let (lo, hi) = (self.omega.col_ptr[j], self.omega.col_ptr[j + 1]);
            if lo == hi {
                continue;
            }
            let yj = &self.y[j * r..(j + 1) * r];
            for idx in lo..hi {
                let i = self.omega.row_idx[idx];
                let row = &self.g_x[i * r..(i + 1) * r];
                let mut t = C64::ZERO;
                for l in 0..r {
                    t += row[l] * yj[l];
                }
                self.t_x[idx] = t;
                t_sq += t.norm_sqr();
            }
        }
        (g_sq, t_sq)
    }

    /// `X ← X + η·G_x`, `R ← R - η·T_x`. A zero step is a no-op.
    pub fn apply_x(&mut self, eta: f64) {
        if eta == 0.0 {
            return;
        }
        for (xv, gv) in self.x.iter_mut().zip(&self.g_x) {
            *xv += gv * eta;
        }
        for (rv, tv) in self.r_vals.iter_mut().zip(&self.t_x) {
            *rv -= tv * eta;
        }
    }

    /// Computes `G_y = Xᴴ·R` and `T_y = P_Ω(X·G_y)`; returns `(‖G_y‖², ‖T_y‖²)`.
    pub fn stage_y(&mut self) -> (f64, f64) {
        let r = self.r;
        self.g_y.fill(C64::ZERO);
        for j in 0..self.omega.cols {
            let (lo, hi) = (self.omega.col_ptr[j], self.omega.col_ptr[j + 1]);
            if lo == hi {
                continue;
            }
            let col = &mut self.g_y[j * r..(j + 1) * r];
            for idx in lo..hi {
                let i = self.omega.row_idx[idx];
                let rv = self.r_vals[idx];
                let xrow = &self.x[i * r..(i + 1) * r];
                for l in 0..r {
                    col[l] += xrow[l].conj() * rv;
                }
            }
        }
        let g_sq: f64 = self.g_y.iter().map(|z| z.norm_sqr()).sum();

        let mut t_sq = 0.0;
        for j in 0..self.omega.cols {
            let (lo, hi) = (self.omega.col_ptr[j], self.omega.col_ptr[j + 1]);
            if lo == hi {
                continue;
            }
            let col = &self.g_y[j * r..(j + 1) * r];
            for idx in lo..hi {
                let i = self.omega.row_idx[idx];
                let xrow = &self.x[i * r..(i + 1) * r];
                let mut t = C64::ZERO;
                for l in 0..r {
                    t += xrow[l] * col[l];
                }
                self.t_y[idx] = t;
                t_sq += t.norm_sqr();
            }
        }
        (g_sq, t_sq)
    }

    pub fn apply_y(&mut self, eta: f64) {
        if eta == 0.0 {
            return;
        }
        for (yv, gv) in self.y.iter_mut().zip(&self.g_y) {
            *yv += gv * eta;
        }
        for (rv, tv) in self.r_vals.iter_mut().zip(&self.t_y) {
            *rv -= tv * eta;
        }
    }

    /// Recomputes the residual exactly from the current factors.
    pub fn refresh(&mut self) {
        let r = self.r;
        for j in 0..self.omega.cols {
            let yj = &self.y[j * r..(j + 1) * r];
            for idx in self.omega.col_ptr[j]..self.omega.col_ptr[j + 1] {
                let i = self.omega.row_idx[idx];
                let xrow = &self.x[i * r..(i + 1) * r];
                let mut z = C64::ZERO;
                for l in 0..r {
                    z += xrow[l] * yj[l];
                }
                self.r_vals[idx] = self.d_vals[idx] - z;
            }
        }
    }

    pub fn residual_norm_sq(&self) -> f64 {
        self.r_vals.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn data_norm_sq(&self) -> f64 {
        self.d_norm_sq
    }

    pub fn relative_residual(&self) -> f64 {
        let rn = self.residual_norm_sq().sqrt();
        let dn = self.d_norm_sq.sqrt();
        if dn > 0.0 {
            rn / dn
        } else if rn == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// The residual entries, aligned with the CSC index arrays.
    #[cfg(test)]
    pub fn residual_values(&self) -> &[C64] {
        &self.r_vals
    }

    pub fn factors(&self) -> FactorPair {
        let (rows, cols) = (self.omega.rows, self.omega.cols);
        let r = self.r;
        let x = Matrix::from_fn(rows, r, |i, l| self.x[i * r + l]);
        let y = Matrix::from_col_major(r, cols, self.y.clone()).expect("kernel Y shape");
        FactorPair { x, y }
    }
}

/// One alternating iteration, shared by the plain driver and tests.
/// Returns the step sizes used (zero marks a skipped half-step).
pub(crate) fn kernel_iteration(k: &mut SparseKernel) -> (f64, f64) {
    let (gx, tx) = k.stage_x();
    let eta_x = if gx > 0.0 && tx > 0.0 { gx / tx } else { 0.0 };
    k.apply_x(eta_x);
    let (gy, ty) = k.stage_y();
    let eta_y = if gy > 0.0 && ty > 0.0 { gy / ty } else { 0.0 };
    k.apply_y(eta_y);
    (eta_x, eta_y)
}

pub(crate) fn check_config(cfg: &AsdConfig) -> Result<()> {
    if cfg.tol_residual <= 0.0 || cfg.tol_stall <= 0.0 {
        return Err(Error::arg("asd", "tolerances must be positive"));
    }
    Ok(())
}

/// One descent state that [`drive`] can step; lets the matrix and tensor
/// solvers share the stopping rules exactly.
pub(crate) trait DescentEngine {
    /// One alternating iteration; returns the step sizes used.
    fn iteration(&mut self) -> (f64, f64);
    /// Exact residual recomputation, discarding incremental drift.
    fn refresh(&mut self);
    fn relative_residual(&self) -> f64;
}

impl DescentEngine for SparseKernel {
    fn iteration(&mut self) -> (f64, f64) {
        kernel_iteration(self)
    }

    fn refresh(&mut self) {
        SparseKernel::refresh(self);
    }

    fn relative_residual(&self) -> f64 {
        SparseKernel::relative_residual(self)
    }
}

pub(crate) fn drive<E: DescentEngine>(
    engine: &mut E,
    cfg: &AsdConfig,
) -> (StopReason, usize, f64, Vec<TraceRow>) {
    let mut relres = engine.relative_residual();
    let mut hist = vec![relres];
    let mut trace = vec![TraceRow { iter: 0, relative_residual: relres, eta_x: 0.0, eta_y: 0.0 }];
    let mut iters = 0;

    let stop = loop {
        if relres <= cfg.tol_residual {
            break StopReason::Converged;
        }
        if iters >= STALL_WINDOW && (hist[iters - STALL_WINDOW] - relres).abs() < cfg.tol_stall {
            break StopReason::Stalled;
        }
        if iters >= cfg.max_iters {
            break StopReason::MaxIters;
        }
        iters += 1;
        let (eta_x, eta_y) = engine.iteration();
        if iters % RESIDUAL_REFRESH_PERIOD == 0 {
            engine.refresh();
        }
        relres = engine.relative_residual();
        hist.push(relres);
        trace.push(TraceRow { iter: iters, relative_residual: relres, eta_x, eta_y });
        if eta_x == 0.0 && eta_y == 0.0 {
            // neither direction admits progress within the mask
            break StopReason::Stalled;
        }
    };

    (stop, iters, relres, trace)
}

pub(crate) fn asd_core(
    d: &Matrix,
    omega: Arc<OmegaCsc>,
    init: &FactorPair,
    cfg: &AsdConfig,
) -> Result<AsdOutcome> {
    check_config(cfg)?;
    if init.rank() == 0 {
        return Err(Error::arg("asd", "completion rank must be at least 1"));
    }
    if init.x.rows() != d.rows() || init.y.cols() != d.cols() || init.x.cols() != init.y.rows() {
        return Err(Error::dims(
            "asd",
            format!(
                "init ({}x{}, {}x{}) against data {}x{}",
                init.x.rows(),
                init.x.cols(),
                init.y.rows(),
                init.y.cols(),
                d.rows(),
                d.cols()
            ),
        ));
    }

    let mut kernel = SparseKernel::new(omega, d, init);
    let (stop, iters, relative_residual, trace) = drive(&mut kernel, cfg);
    Ok(AsdOutcome { factors: kernel.factors(), stop, iters, relative_residual, trace })
}

pub(crate) fn csc_from_pattern(d: &Matrix, omega: &SamplingPattern) -> Result<OmegaCsc> {
    let PatternDims::Matrix { rows, cols } = omega.dims() else {
        return Err(Error::dims("asd", "pattern has tensor dims; flatten it first"));
    };
    if (rows, cols) != (d.rows(), d.cols()) {
        return Err(Error::dims(
            "asd",
            format!("{rows}x{cols} mask on {}x{} data", d.rows(), d.cols()),
        ));
    }
    Ok(OmegaCsc::from_mask(rows, cols, omega.mask()))
}

/// Runs alternating steepest descent from the given starting factors.
pub fn asd(
    d: &Matrix,
    omega: &SamplingPattern,
    init: &FactorPair,
    cfg: &AsdConfig,
) -> Result<AsdOutcome> {
    let csc = csc_from_pattern(d, omega)?;
    asd_core(d, Arc::new(csc), init, cfg)
}

/// Runs ASD from standard Gaussian factors drawn from `cfg.seed`.
pub fn asd_random_init(
    d: &Matrix,
    omega: &SamplingPattern,
    r: usize,
    cfg: &AsdConfig,
) -> Result<AsdOutcome> {
    let init = FactorPair::gaussian(d.rows(), d.cols(), r, cfg.seed);
    asd(d, omega, &init, cfg)
}

/// The cheap residual update `R' = R - η·T` with `T = P_Ω(G·Y)` already
/// masked; `η = 0` returns the residual unchanged.
pub fn residual_update(r: &Matrix, eta: f64, masked_step: &Matrix) -> Result<Matrix> {
    if (r.rows(), r.cols()) != (masked_step.rows(), masked_step.cols()) {
        return Err(Error::dims(
            "residual_update",
            format!(
                "{}x{} residual, {}x{} step",
                r.rows(),
                r.cols(),
                masked_step.rows(),
                masked_step.cols()
            ),
        ));
    }
    let mut out = r.clone();
    out.axpy(C64::new(-eta, 0.0), masked_step);
    Ok(out)
}

/// How LoopedASD chooses the completion rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankRule {
    /// Grow to `r_max` and pick the knee of the test-error curve.
    Auto { r_max: usize },
    /// Grow to `r` and complete at exactly that rank.
    Fixed { r: usize },
}

#[derive(Debug, Clone)]
pub struct LoopedConfig {
    pub rank: RankRule,
    pub folds: usize,
    pub knee: KneeMethod,
    pub inner: AsdConfig,
    pub final_run: AsdConfig,
    /// Pick the test fold uniformly at random every loop iteration instead
    /// of cycling through a shuffled deck.
    pub strict_paper: bool,
    pub seed: u64,
}

impl LoopedConfig {
    pub fn auto(r_max: usize, seed: u64) -> Self {
        LoopedConfig {
            rank: RankRule::Auto { r_max },
            folds: 5,
            knee: KneeMethod::Kneedle,
            inner: AsdConfig::default(),
            final_run: AsdConfig::default(),
            strict_paper: false,
            seed,
        }
    }

    pub fn fixed(r: usize, seed: u64) -> Self {
        LoopedConfig { rank: RankRule::Fixed { r }, ..LoopedConfig::auto(r, seed) }
    }
}

/// Default rank-growth ceiling for a matrix of the given shape.
pub fn default_r_max(rows: usize, cols: usize) -> usize {
    rows.min(cols).min(60)
}

#[derive(Debug, Clone)]
pub struct LoopedOutcome {
    pub factors: FactorPair,
    /// The selected completion rank.
    pub rank: usize,
    /// Held-out test error per candidate rank, `test_errors[j-1]` for rank j.
    pub test_errors: Vec<f64>,
    /// Knee detection failed or was suspect; the rank is a fallback choice.
    pub no_knee: bool,
    pub stop: StopReason,
    /// Iterations of the final polishing run.
    pub iters: usize,
    /// Iterations summed over the rank-growth loop.
    pub inner_iters: usize,
    pub relative_residual: f64,
    pub trace: Vec<TraceRow>,
}

fn append_col(x: &Matrix, col: &[C64]) -> Matrix {
    let (rows, r) = (x.rows(), x.cols());
    assert_eq!(col.len(), rows);
    let mut data = Vec::with_capacity(rows * (r + 1));
    data.extend_from_slice(x.data());
    data.extend_from_slice(col);
    Matrix::from_col_major(rows, r + 1, data).expect("append_col shape")
}

fn append_row(y: &Matrix, row: &[C64]) -> Matrix {
    let (r, cols) = (y.rows(), y.cols());
    assert_eq!(row.len(), cols);
    let mut out = Matrix::zeros(r + 1, cols);
    for j in 0..cols {
        let dst = out.col_mut(j);
        dst[..r].copy_from_slice(y.col(j));
        dst[r] = row[j];
    }
    // borrow of y.col ended above
    out
}

/// Economy SVD of the product `X·Y` without forming it at full size: QR of
/// `X`, then the SVD of the small matrix `R_x·Y`.
pub(crate) fn product_svd(x: &Matrix, y: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let qr = to_na(x).qr();
    let q = qr.q();
    let b = from_na(&(qr.r() * to_na(y)));
    let (ub, s, v) = matrix_svd(&b);
    let u = from_na(&(q * to_na(&ub)));
    (u, s, v)
}

/// Projects factors onto rank `r` through the SVD of their product.
/// Returns `(U(:,1:r), S(1:r,1:r)·V(:,1:r)ᴴ)`.
pub(crate) fn project_to_rank(x: &Matrix, y: &Matrix, r: usize) -> (Matrix, Matrix) {
    let (u, s, v) = product_svd(x, y);
    let rr = r.min(s.len());
    let x0 = Matrix::from_fn(x.rows(), rr, |i, l| u.at(i, l));
    let y0 = Matrix::from_fn(rr, y.cols(), |l, j| v.at(j, l).conj() * s[l]);
    (x0, y0)
}

fn masked_positions(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter_map(|(pos, &b)| b.then_some(pos)).collect()
}

fn test_error(d: &Matrix, positions: &[usize], fp: &FactorPair) -> f64 {
    let n1 = d.rows();
    let r = fp.rank();
    let mut acc = 0.0;
    for &pos in positions {
        let (i, j) = (pos % n1, pos / n1);
        let mut z = C64::ZERO;
        for l in 0..r {
            z += fp.x.at(i, l) * fp.y.at(l, j);
        }
        acc += (d.at(i, j) - z).norm_sqr();
    }
    acc.sqrt()
}

/// Rank-incremental ASD with cross-validated rank selection.
pub fn looped_asd(d: &Matrix, omega: &SamplingPattern, cfg: &LoopedConfig) -> Result<LoopedOutcome> {
    let full = Arc::new(csc_from_pattern(d, omega)?);
    let (rows, cols) = (full.rows, full.cols);
    check_config(&cfg.inner)?;
    check_config(&cfg.final_run)?;
    if cfg.folds < 2 {
        return Err(Error::arg("looped_asd", format!("need at least 2 folds, got {}", cfg.folds)));
    }
    let r_target = match cfg.rank {
        RankRule::Auto { r_max } => r_max,
        RankRule::Fixed { r } => r,
    };
    if r_target < 1 || r_target > rows.min(cols) {
        return Err(Error::arg(
            "looped_asd",
            format!("rank target {r_target} outside 1..={}", rows.min(cols)),
        ));
    }
    if full.nnz() == 0 {
        return Err(Error::arg("looped_asd", "empty sampling pattern"));
    }

    // Fold partition: shuffle the observed positions once, then slice into
    // `folds` nearly equal chunks.
    let mut positions = masked_positions(omega.mask());
    let mut fold_rng = rng::rng_from_seed(split_seed(cfg.seed, 0));
    positions.shuffle(&mut fold_rng);
    let nnz = positions.len();
    let k = cfg.folds;
    let fold_bounds: Vec<(usize, usize)> = (0..k).map(|f| (f * nnz / k, (f + 1) * nnz / k)).collect();

    let d_norm_omega = {
        let acc: f64 = positions
            .iter()
            .map(|&pos| d.at(pos % rows, pos / rows).norm_sqr())
            .sum();
        acc.sqrt()
    };
    if d_norm_omega == 0.0 {
        return Err(Error::arg("looped_asd", "observed data is identically zero"));
    }
    let p = nnz as f64 / (rows * cols) as f64;

    let mut pick_rng = rng::rng_from_seed(split_seed(cfg.seed, 1));
    let mut deck: Vec<usize> = Vec::new();
    let mut pick_fold = |strict: bool| -> usize {
        for _ in 0..64 {
            let f = if strict {
                pick_rng.random_range(0..k)
            } else {
                if deck.is_empty() {
                    deck = (0..k).collect();
                    deck.shuffle(&mut pick_rng);
                }
                deck.pop().unwrap()
            };
            let (lo, hi) = fold_bounds[f];
            if lo < hi {
                return f;
            }
        }
        // tiny |Ω|: fall back to the first nonempty fold
        (0..k).find(|&f| fold_bounds[f].0 < fold_bounds[f].1).unwrap()
    };

    let mut factors = FactorPair::empty(rows, cols);
    let mut test_errors = Vec::with_capacity(r_target);
    let mut inner_iters = 0;

    for j in 1..=r_target {
        let fold = pick_fold(cfg.strict_paper);
        let (lo, hi) = fold_bounds[fold];
        let test_positions = &positions[lo..hi];

        let mut train_mask = omega.mask().to_vec();
        for &pos in test_positions {
            train_mask[pos] = false;
        }
        let train = Arc::new(OmegaCsc::from_mask(rows, cols, &train_mask));

        // Augment the previous factors by one rescaled Gaussian column/row.
        let mut aug_rng = rng::rng_from_seed(split_seed(cfg.seed, 1 + j as u64));
        let g_x = rng::gaussian_vec(&mut aug_rng, rows);
        let g_y = rng::gaussian_vec(&mut aug_rng, cols);
        let common = 0.5f64.powi(j as i32) * p.sqrt() / d_norm_omega;
        let nx = g_x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let ny = g_y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let x_new: Vec<C64> = g_x.iter().map(|z| z * (common / nx)).collect();
        let y_new: Vec<C64> = g_y.iter().map(|z| z * (common / ny)).collect();
        let init = FactorPair {
            x: append_col(&factors.x, &x_new),
            y: append_row(&factors.y, &y_new),
        };

        let outcome = asd_core(d, train, &init, &cfg.inner)?;
        inner_iters += outcome.iters;
        factors = outcome.factors;
        test_errors.push(test_error(d, test_positions, &factors));
    }

    let (rank, no_knee) = match cfg.rank {
        RankRule::Fixed { r } => (r, false),
        RankRule::Auto { .. } => {
            if test_errors.len() >= 3 {
                let res = knee_detect(&test_errors, cfg.knee)?;
                (res.index, res.no_knee)
            } else {
                (r_target, true)
            }
        }
    };

    let (x0, y0) = project_to_rank(&factors.x, &factors.y, rank);
    let final_outcome = asd_core(d, full, &FactorPair { x: x0, y: y0 }, &cfg.final_run)?;

    Ok(LoopedOutcome {
        factors: final_outcome.factors,
        rank,
        test_errors,
        no_knee,
        stop: final_outcome.stop,
        iters: final_outcome.iters,
        inner_iters,
        relative_residual: final_outcome.relative_residual,
        trace: final_outcome.trace,
    })
}
