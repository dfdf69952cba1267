//! Tensor completion by alternating steepest descent.
//!
//! Two solvers share the matrix driver's stopping rules:
//!
//! * [`tasd`] minimizes `½‖D − P_Ω(X ⋆ Y)‖²` over a factor pair of t-rank
//!   `t`, taking the exact line-search step along each factor gradient in
//!   turn. When the mask covers whole mode-3 tubes the problem splits into
//!   independent per-slice matrix completions in the transform domain and
//!   the solver steps every slice with one shared step size, never touching
//!   the spatial domain until output. For general masks the factors stay in
//!   the transform domain while the residual and the mask live in the
//!   spatial domain, at the cost of four mode-3 transforms per iteration.
//! * [`tasdii`] completes each transform-domain slice independently at an
//!   automatically chosen rank, pools every slice's singular values to pick
//!   a global energy threshold, then zeroes, rebuilds, or re-completes each
//!   slice at its reduced rank before transforming back.

use std::collections::HashSet;
use std::sync::Arc;

use crate::algebra::{conj_transpose, mprod, tip, truncate_energy, RankProfile};
use crate::asd::{
    asd_core, check_config, drive, looped_asd, product_svd, AsdConfig, DescentEngine, FactorPair,
    LoopedConfig, OmegaCsc, RankRule, SparseKernel, StopReason, TraceRow,
};
use crate::error::{Error, Result};
use crate::par;
use crate::rng::{self, split_seed};
use crate::sampling::{PatternDims, SamplingPattern, SliceMask};
use crate::tensor::{C64, Matrix, Tensor3};
use crate::transform::{Transform, TransformKind};

/// Factors `X: n1×t×n3`, `Y: t×n2×n3` of a t-rank-`t` candidate completion
/// `X ⋆ Y` under the stored transform.
#[derive(Debug, Clone)]
pub struct TensorFactorPair {
    pub x: Tensor3,
    pub y: Tensor3,
    pub transform: Transform,
}

impl TensorFactorPair {
    pub fn new(x: Tensor3, y: Tensor3, transform: Transform) -> Result<Self> {
        let (_, t, k1) = x.dims();
        let (t2, _, k2) = y.dims();
        if t == 0 {
            return Err(Error::arg("TensorFactorPair", "t-rank must be at least 1"));
        }
        if t2 != t || k1 != k2 || k1 != transform.n3() {
            return Err(Error::dims(
                "TensorFactorPair",
                format!(
                    "X width {t} / depth {k1}, Y height {t2} / depth {k2}, transform length {}",
                    transform.n3()
                ),
            ));
        }
        Ok(TensorFactorPair { x, y, transform })
    }

    /// Standard complex Gaussian factors for an `n1×n2×n3` completion at
    /// t-rank `t`.
    pub fn gaussian(
        n1: usize,
        n2: usize,
        n3: usize,
        t: usize,
        transform: &Transform,
        seed: u64,
    ) -> Result<Self> {
        let mut rx = rng::rng_from_seed(split_seed(seed, 0));
        let mut ry = rng::rng_from_seed(split_seed(seed, 1));
        TensorFactorPair::new(
            rng::gaussian_tensor(&mut rx, n1, t, n3),
            rng::gaussian_tensor(&mut ry, t, n2, n3),
            transform.clone(),
        )
    }

    pub fn t_rank(&self) -> usize {
        self.x.dims().1
    }

    pub fn product(&self) -> Result<Tensor3> {
        mprod(&self.x, &self.y, &self.transform)
    }
}

#[derive(Debug, Clone)]
pub struct TasdOutcome {
    pub factors: TensorFactorPair,
    pub stop: StopReason,
    pub iters: usize,
    pub relative_residual: f64,
    pub trace: Vec<TraceRow>,
}

fn relative_residual_from(resid_norm_sq: f64, data_norm_sq: f64) -> f64 {
    let rn = resid_norm_sq.sqrt();
    let dn = data_norm_sq.sqrt();
    if dn > 0.0 {
        rn / dn
    } else if rn == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Tube-complete fast path: one sparse kernel per transform-domain slice,
/// all advanced with a single global step size. Norm totals are folded in
/// slice order so results do not depend on the thread count.
struct SliceKernelEngine {
    kernels: Vec<SparseKernel>,
}

impl SliceKernelEngine {
    fn new(d_hat: &Tensor3, x_hat: &Tensor3, y_hat: &Tensor3, csc: &Arc<OmegaCsc>) -> Self {
        let n3 = d_hat.dims().2;
        let kernels = par::map_indexed(n3, |k| {
            let init = FactorPair { x: x_hat.frontal(k), y: y_hat.frontal(k) };
            SparseKernel::new(csc.clone(), &d_hat.frontal(k), &init)
        });
        SliceKernelEngine { kernels }
    }

    fn half_step_x(&mut self) -> f64 {
        let staged = par::map_each_mut(&mut self.kernels, |_, k| k.stage_x());
        let (g, t) = staged.iter().fold((0.0, 0.0), |(a, b), &(gk, tk)| (a + gk, b + tk));
        let eta = if g > 0.0 && t > 0.0 { g / t } else { 0.0 };
        if eta != 0.0 {
            par::map_each_mut(&mut self.kernels, |_, k| k.apply_x(eta));
        }
        eta
    }

    fn half_step_y(&mut self) -> f64 {
        let staged = par::map_each_mut(&mut self.kernels, |_, k| k.stage_y());
        let (g, t) = staged.iter().fold((0.0, 0.0), |(a, b), &(gk, tk)| (a + gk, b + tk));
        let eta = if g > 0.0 && t > 0.0 { g / t } else { 0.0 };
        if eta != 0.0 {
            par::map_each_mut(&mut self.kernels, |_, k| k.apply_y(eta));
        }
        eta
    }

    #[cfg(test)]
    fn residual_norm_sq(&self) -> f64 {
        self.kernels.iter().map(|k| k.residual_norm_sq()).sum()
    }

    fn factors(&self, transform: &Transform) -> Result<TensorFactorPair> {
        let n3 = self.kernels.len();
        let first = self.kernels[0].factors();
        let (n1, t) = (first.x.rows(), first.x.cols());
        let n2 = first.y.cols();
        let mut x_hat = Tensor3::zeros(n1, t, n3);
        let mut y_hat = Tensor3::zeros(t, n2, n3);
        x_hat.set_frontal(0, &first.x);
        y_hat.set_frontal(0, &first.y);
        for (k, kernel) in self.kernels.iter().enumerate().skip(1) {
            let fp = kernel.factors();
            x_hat.set_frontal(k, &fp.x);
            y_hat.set_frontal(k, &fp.y);
        }
        TensorFactorPair::new(
            transform.apply_inverse(&x_hat)?,
            transform.apply_inverse(&y_hat)?,
            transform.clone(),
        )
    }
}

impl DescentEngine for SliceKernelEngine {
    fn iteration(&mut self) -> (f64, f64) {
        (self.half_step_x(), self.half_step_y())
    }

    fn refresh(&mut self) {
        par::map_each_mut(&mut self.kernels, |_, k| k.refresh());
    }

    fn relative_residual(&self) -> f64 {
        let rn: f64 = self.kernels.iter().map(|k| k.residual_norm_sq()).sum();
        let dn: f64 = self.kernels.iter().map(|k| k.data_norm_sq()).sum();
        relative_residual_from(rn, dn)
    }
}

/// General-mask path: factors in the transform domain, residual and mask in
/// the spatial domain. Each half-step transforms the residual forward and
/// the candidate step back.
struct DenseEngine<'a> {
    transform: &'a Transform,
    omega: &'a SamplingPattern,
    /// Masked data, spatial domain.
    d: &'a Tensor3,
    d_norm_sq: f64,
    scale_sq: f64,
    x_hat: Tensor3,
    y_hat: Tensor3,
    /// `P_Ω(D) − P_Ω(X ⋆ Y)`, spatial domain.
    resid: Tensor3,
}

impl DenseEngine<'_> {
    fn half_step_x(&mut self) -> f64 {
        let n3 = self.x_hat.dims().2;
        let r_hat = self.transform.apply(&self.resid).expect("residual depth fixed");
        let y_hat = &self.y_hat;
        let pieces: Vec<(Matrix, Matrix)> = par::map_indexed(n3, |k| {
            let yk = y_hat.frontal(k);
            let gk = r_hat.frontal(k).mul(&yk.conj_transpose());
            let wk = gk.mul(&yk);
            (gk, wk)
        });
        let (n1, t, _) = self.x_hat.dims();
        let n2 = self.y_hat.dims().1;
        let mut g_hat = Tensor3::zeros(n1, t, n3);
        let mut w_hat = Tensor3::zeros(n1, n2, n3);
        for (k, (gk, wk)) in pieces.iter().enumerate() {
            g_hat.set_frontal(k, gk);
            w_hat.set_frontal(k, wk);
        }
        let num = g_hat.norm_sq() / self.scale_sq;
        let w = self.transform.apply_inverse(&w_hat).expect("step depth fixed");
        let step = self.omega.project_tensor(&w).expect("mask shape fixed");
        let den = step.norm_sq();
        let eta = if num > 0.0 && den > 0.0 { num / den } else { 0.0 };
        if eta != 0.0 {
            self.x_hat.axpy(C64::new(eta, 0.0), &g_hat);
            self.resid.axpy(C64::new(-eta, 0.0), &step);
        }
        eta
    }

    fn half_step_y(&mut self) -> f64 {
        let n3 = self.x_hat.dims().2;
        let r_hat = self.transform.apply(&self.resid).expect("residual depth fixed");
        let x_hat = &self.x_hat;
        let pieces: Vec<(Matrix, Matrix)> = par::map_indexed(n3, |k| {
            let xk = x_hat.frontal(k);
            let gk = xk.conj_transpose().mul(&r_hat.frontal(k));
            let wk = xk.mul(&gk);
            (gk, wk)
        });
        let (n1, t, _) = self.x_hat.dims();
        let n2 = self.y_hat.dims().1;
        let mut g_hat = Tensor3::zeros(t, n2, n3);
        let mut w_hat = Tensor3::zeros(n1, n2, n3);
        for (k, (gk, wk)) in pieces.iter().enumerate() {
            g_hat.set_frontal(k, gk);
            w_hat.set_frontal(k, wk);
        }
        let num = g_hat.norm_sq() / self.scale_sq;
        let w = self.transform.apply_inverse(&w_hat).expect("step depth fixed");
        let step = self.omega.project_tensor(&w).expect("mask shape fixed");
        let den = step.norm_sq();
        let eta = if num > 0.0 && den > 0.0 { num / den } else { 0.0 };
        if eta != 0.0 {
            self.y_hat.axpy(C64::new(eta, 0.0), &g_hat);
            self.resid.axpy(C64::new(-eta, 0.0), &step);
        }
        eta
    }

    fn factors(&self) -> Result<TensorFactorPair> {
        TensorFactorPair::new(
            self.transform.apply_inverse(&self.x_hat)?,
            self.transform.apply_inverse(&self.y_hat)?,
            self.transform.clone(),
        )
    }
}

impl DescentEngine for DenseEngine<'_> {
    fn iteration(&mut self) -> (f64, f64) {
        (self.half_step_x(), self.half_step_y())
    }

    fn refresh(&mut self) {
        let n3 = self.x_hat.dims().2;
        let x_hat = &self.x_hat;
        let y_hat = &self.y_hat;
        let prods: Vec<Matrix> = par::map_indexed(n3, |k| x_hat.frontal(k).mul(&y_hat.frontal(k)));
        let (n1, n2) = (self.x_hat.dims().0, self.y_hat.dims().1);
        let mut prod_hat = Tensor3::zeros(n1, n2, n3);
        for (k, p) in prods.iter().enumerate() {
            prod_hat.set_frontal(k, p);
        }
        let z = self.transform.apply_inverse(&prod_hat).expect("product depth fixed");
        let pz = self.omega.project_tensor(&z).expect("mask shape fixed");
        self.resid = self.d.sub(&pz);
    }

    fn relative_residual(&self) -> f64 {
        relative_residual_from(self.resid.norm_sq(), self.d_norm_sq)
    }
}

fn check_problem(d: &Tensor3, omega: &SamplingPattern, init: &TensorFactorPair) -> Result<()> {
    let (n1, n2, n3) = d.dims();
    let mask_ok = matches!(
        omega.dims(),
        PatternDims::Tensor { n1: m1, n2: m2, n3: m3 } if (m1, m2, m3) == (n1, n2, n3)
    );
    if !mask_ok {
        return Err(Error::dims("tasd", format!("mask does not cover {n1}x{n2}x{n3} data")));
    }
    let (x1, t, x3) = init.x.dims();
    let (y1, y2, y3) = init.y.dims();
    if t == 0 {
        return Err(Error::arg("tasd", "t-rank must be at least 1"));
    }
    if x1 != n1 || y2 != n2 || x3 != n3 || y3 != n3 || y1 != t || init.transform.n3() != n3 {
        return Err(Error::dims(
            "tasd",
            format!("factors ({x1}x{t}x{x3}, {y1}x{y2}x{y3}) against data {n1}x{n2}x{n3}"),
        ));
    }
    Ok(())
}

/// Completes `D` on the mask by alternating exact-line-search descent on the
/// two factors of `X ⋆ Y`, starting from `init` and using its transform.
pub fn tasd(
    d: &Tensor3,
    omega: &SamplingPattern,
    init: &TensorFactorPair,
    cfg: &AsdConfig,
) -> Result<TasdOutcome> {
    check_config(cfg)?;
    check_problem(d, omega, init)?;
    let (n1, n2, _) = d.dims();
    let transform = &init.transform;
    let masked = omega.project_tensor(d)?;

    if omega.is_tube_complete() {
        let sm = omega.slice_mask()?;
        let d_hat = transform.apply(&masked)?;
        let x_hat = transform.apply(&init.x)?;
        let y_hat = transform.apply(&init.y)?;
        let csc = Arc::new(OmegaCsc::from_mask(n1, n2, sm.mask()));
        let mut engine = SliceKernelEngine::new(&d_hat, &x_hat, &y_hat, &csc);
        let (stop, iters, relative_residual, trace) = drive(&mut engine, cfg);
        let factors = engine.factors(transform)?;
        Ok(TasdOutcome { factors, stop, iters, relative_residual, trace })
    } else {
        let x_hat = transform.apply(&init.x)?;
        let y_hat = transform.apply(&init.y)?;
        let mut engine = DenseEngine {
            transform,
            omega,
            d: &masked,
            d_norm_sq: masked.norm_sq(),
            scale_sq: transform.scale_sq(),
            x_hat,
            y_hat,
            resid: masked.clone(),
        };
        engine.refresh();
        let (stop, iters, relative_residual, trace) = drive(&mut engine, cfg);
        let factors = engine.factors()?;
        Ok(TasdOutcome { factors, stop, iters, relative_residual, trace })
    }
}

/// Runs [`tasd`] from standard Gaussian factors drawn from `cfg.seed`.
pub fn tasd_random_init(
    d: &Tensor3,
    omega: &SamplingPattern,
    t: usize,
    transform: &Transform,
    cfg: &AsdConfig,
) -> Result<TasdOutcome> {
    let (n1, n2, n3) = d.dims();
    let init = TensorFactorPair::gaussian(n1, n2, n3, t, transform, cfg.seed)?;
    tasd(d, omega, &init, cfg)
}

/// Compares the analytic directional derivative of the completion objective
/// against a central difference along `direction` and returns the larger of
/// the two relative errors (X and Y sides). The objective is quadratic along
/// any fixed direction, so the central difference is exact up to rounding.
pub fn tasd_gradient_check(
    d: &Tensor3,
    omega: &SamplingPattern,
    point: &TensorFactorPair,
    direction: &TensorFactorPair,
) -> Result<f64> {
    check_problem(d, omega, point)?;
    if direction.x.dims() != point.x.dims() || direction.y.dims() != point.y.dims() {
        return Err(Error::dims("tasd_gradient_check", "direction does not match the point"));
    }
    let t = &point.transform;
    let masked = omega.project_tensor(d)?;
    let objective = |x: &Tensor3, y: &Tensor3| -> Result<f64> {
        let pz = omega.project_tensor(&mprod(x, y, t)?)?;
        Ok(0.5 * masked.sub(&pz).norm_sq())
    };

    let f0 = objective(&point.x, &point.y)?;
    let scale = f0.max(1.0);
    let resid = masked.sub(&omega.project_tensor(&point.product()?)?);
    let g_x = mprod(&resid, &conj_transpose(&point.y, t)?, t)?;
    let g_y = mprod(&conj_transpose(&point.x, t)?, &resid, t)?;

    let h = 1e-3;
    let shifted = |base: &Tensor3, dir: &Tensor3, step: f64| {
        let mut out = base.clone();
        out.axpy(C64::new(step, 0.0), dir);
        out
    };

    let num_x = (objective(&shifted(&point.x, &direction.x, h), &point.y)?
        - objective(&shifted(&point.x, &direction.x, -h), &point.y)?)
        / (2.0 * h);
    let ana_x = -tip(&g_x, &direction.x, t)?.re;

    let num_y = (objective(&point.x, &shifted(&point.y, &direction.y, h))?
        - objective(&point.x, &shifted(&point.y, &direction.y, -h))?)
        / (2.0 * h);
    let ana_y = -tip(&g_y, &direction.y, t)?.re;

    Ok(((num_x - ana_x).abs() / scale).max((num_y - ana_y).abs() / scale))
}

/// Splits the completion objective into its per-slice transform-domain
/// parts `½‖D̂_k − P_Ω̄(X̂_k·Ŷ_k)‖²`. Their sum times `1/c²` equals the
/// spatial objective; this requires a tube-complete mask.
pub fn decompose_objective(
    d: &Tensor3,
    omega: &SamplingPattern,
    pair: &TensorFactorPair,
) -> Result<Vec<f64>> {
    check_problem(d, omega, pair)?;
    let sm = omega.slice_mask()?;
    let t = &pair.transform;
    let masked = omega.project_tensor(d)?;
    let d_hat = t.apply(&masked)?;
    let x_hat = t.apply(&pair.x)?;
    let y_hat = t.apply(&pair.y)?;
    let n3 = d_hat.dims().2;
    let mut out = Vec::with_capacity(n3);
    for k in 0..n3 {
        let fit = sm.project_matrix(&x_hat.frontal(k).mul(&y_hat.frontal(k)))?;
        out.push(0.5 * d_hat.frontal(k).sub(&fit).norm_sq());
    }
    Ok(out)
}

/// How the slicewise completer handled one transform-domain slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceStatus {
    /// Completed and kept at its estimated rank.
    Completed,
    /// Zeroed: every singular value fell below the energy threshold, the
    /// slice was skip-listed, or its completion failed outright.
    ZeroedByThreshold,
    /// Zeroed because its neighboring slices were zero.
    ZeroedByRule,
    /// Re-completed at the reduced rank from a truncated-SVD warm start.
    WarmRestarted,
}

impl SliceStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SliceStatus::Completed => "completed",
            SliceStatus::ZeroedByThreshold => "zeroed-by-threshold",
            SliceStatus::ZeroedByRule => "zeroed-by-rule",
            SliceStatus::WarmRestarted => "warm-restarted",
        }
    }
}

impl std::fmt::Display for SliceStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-slice bookkeeping from [`tasdii`]. Slices filled in by conjugate
/// symmetry inherit their partner's ranks and status with `iters = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceCompletionRecord {
    /// 1-based slice index, matching the records CSV.
    pub k: usize,
    /// Rank of the independent slice completion.
    pub rho_initial: usize,
    /// Rank kept after energy truncation and the zero-slice rule.
    pub rho_reduced: usize,
    pub status: SliceStatus,
    /// Fit against the observed entries of the transform-domain slice, in
    /// dB (`-inf` for an exact fit, e.g. a zeroed slice of zero data).
    pub slice_rse_db: f64,
    /// Completion iterations spent on this slice across both stages.
    pub iters: usize,
}

#[derive(Debug, Clone)]
pub struct TasdiiConfig {
    /// Fraction of pooled singular-value energy the kept ranks must explain.
    pub gamma: f64,
    /// Per-slice completion settings; `looped.seed` is the base seed and
    /// each slice works from an independent stream split off it. An
    /// automatic rank ceiling is clamped to `min(n1, n2)`.
    pub looped: LoopedConfig,
    /// Zero any slice whose neighbors (`k−1`, `k+1`; one neighbor at the
    /// ends) are all zero after truncation. The first slice is exempt under
    /// the DFT, where it carries the mean.
    pub zero_slice_rule: bool,
    /// 1-based slice indices forced to zero before completion. With
    /// conjugate symmetry active, skipping a slice also skips its mirror.
    pub skip_slices: Vec<usize>,
    /// For real data under the DFT, complete slices `k ≤ n3/2` only and
    /// fill the rest with conjugate mirrors.
    pub use_conjugate_symmetry: bool,
    /// Thread-pool width for the per-slice stages; `None` uses the ambient
    /// pool. Results are identical for any width.
    pub threads: Option<usize>,
}

impl TasdiiConfig {
    /// Defaults: automatic per-slice ranks up to `min(n1, n2, 60)`, the
    /// zero-slice rule on, conjugate symmetry on.
    pub fn new(gamma: f64, seed: u64) -> Self {
        TasdiiConfig {
            gamma,
            looped: LoopedConfig::auto(60, seed),
            zero_slice_rule: true,
            skip_slices: Vec::new(),
            use_conjugate_symmetry: true,
            threads: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TasdiiOutcome {
    pub completed: Tensor3,
    pub records: Vec<SliceCompletionRecord>,
    /// Rank profile implied by the kept per-slice ranks.
    pub profile: RankProfile,
}

impl TasdiiOutcome {
    /// True when every slice was zeroed and the completion is the zero
    /// tensor; callers may want to warn.
    pub fn all_zeroed(&self) -> bool {
        self.records.iter().all(|r| r.rho_reduced == 0)
    }
}

fn conj_matrix(m: &Matrix) -> Matrix {
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m.at(i, j).conj())
}

fn rebuild_from_svd(u: &Matrix, s: &[f64], v: &Matrix, r: usize) -> Matrix {
    let us = Matrix::from_fn(u.rows(), r, |i, l| u.at(i, l) * s[l]);
    let vh = Matrix::from_fn(r, v.rows(), |l, j| v.at(j, l).conj());
    us.mul(&vh)
}

fn db_ratio(err_norm: f64, data_norm: f64) -> f64 {
    if err_norm == 0.0 {
        f64::NEG_INFINITY
    } else if data_norm > 0.0 {
        20.0 * (err_norm / data_norm).log10()
    } else {
        f64::INFINITY
    }
}

/// Completes a tube-complete sampled tensor slice by slice in the transform
/// domain: estimate each slice's rank independently, pool all singular
/// values and keep only those above the global `gamma`-energy threshold,
/// then zero / rebuild / warm-restart each slice at its reduced rank and
/// transform the stack back.
pub fn tasdii(
    d: &Tensor3,
    omega: &SamplingPattern,
    transform: &Transform,
    cfg: &TasdiiConfig,
) -> Result<TasdiiOutcome> {
    let (n1, n2, n3) = d.dims();
    let mask_ok = matches!(
        omega.dims(),
        PatternDims::Tensor { n1: m1, n2: m2, n3: m3 } if (m1, m2, m3) == (n1, n2, n3)
    );
    if !mask_ok {
        return Err(Error::dims("tasdii", format!("mask does not cover {n1}x{n2}x{n3} data")));
    }
    if transform.n3() != n3 {
        return Err(Error::dims(
            "tasdii",
            format!("transform length {} on depth-{n3} data", transform.n3()),
        ));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma <= 1.0) {
        return Err(Error::arg("tasdii", format!("gamma = {} outside (0, 1]", cfg.gamma)));
    }
    for &k in &cfg.skip_slices {
        if k == 0 || k > n3 {
            return Err(Error::arg("tasdii", format!("skip slice {k} outside 1..={n3}")));
        }
    }
    // Validate the per-slice configuration up front: inside the slice loop a
    // configuration error would be indistinguishable from a failed
    // completion and would silently zero every slice.
    check_config(&cfg.looped.inner)?;
    check_config(&cfg.looped.final_run)?;
    if cfg.looped.folds < 2 {
        return Err(Error::arg("tasdii", "cross-validation needs at least 2 folds"));
    }
    let mut lcfg = cfg.looped.clone();
    match lcfg.rank {
        RankRule::Auto { r_max } => {
            let capped = r_max.min(n1).min(n2);
            if capped == 0 {
                return Err(Error::arg("tasdii", "rank ceiling must be at least 1"));
            }
            lcfg.rank = RankRule::Auto { r_max: capped };
        }
        RankRule::Fixed { r } => {
            if r == 0 || r > n1.min(n2) {
                return Err(Error::arg(
                    "tasdii",
                    format!("fixed rank {r} outside 1..={}", n1.min(n2)),
                ));
            }
        }
    }

    let masked = omega.project_tensor(d)?;
    let sm = omega.slice_mask()?;
    par::with_thread_pool(cfg.threads, || tasdii_stages(&masked, &sm, transform, cfg, &lcfg))
}

struct SliceFit {
    svd: Option<(Matrix, Vec<f64>, Matrix)>,
    rho: usize,
    iters: usize,
}

fn tasdii_stages(
    masked: &Tensor3,
    sm: &SliceMask,
    transform: &Transform,
    cfg: &TasdiiConfig,
    lcfg: &LoopedConfig,
) -> Result<TasdiiOutcome> {
    let (n1, n2, n3) = masked.dims();
    let d_hat = transform.apply(masked)?;
    let slice_pattern = sm.to_pattern();
    let csc = Arc::new(OmegaCsc::from_mask(n1, n2, sm.mask()));

    let real_sym = cfg.use_conjugate_symmetry
        && transform.kind() == TransformKind::Dft
        && n3 > 1
        && masked.max_imag_abs() == 0.0;
    let active: Vec<usize> = if real_sym { (0..=n3 / 2).collect() } else { (0..n3).collect() };

    let mut skip: HashSet<usize> = cfg.skip_slices.iter().map(|&k| k - 1).collect();
    if real_sym {
        for k in cfg.skip_slices.iter().map(|&k| k - 1).collect::<Vec<_>>() {
            skip.insert((n3 - k) % n3);
        }
    }

    // Stage 1: independent completion of each active slice at an
    // automatically estimated rank, on its own random stream. A slice whose
    // observed entries are all zero has an infinite relative residual — no
    // run can converge on it — so it is zeroed outright, as is any slice
    // whose completion fails or returns non-finite values.
    let stage1: Vec<SliceFit> = par::map_indexed(active.len(), |idx| {
        let k = active[idx];
        let dk = d_hat.frontal(k);
        if skip.contains(&k) || dk.frobenius_norm() == 0.0 {
            return SliceFit { svd: None, rho: 0, iters: 0 };
        }
        let mut scfg = lcfg.clone();
        scfg.seed = split_seed(lcfg.seed, k as u64);
        match looped_asd(&dk, &slice_pattern, &scfg) {
            Ok(out) => {
                let spent = out.inner_iters + out.iters;
                let (u, s, v) = product_svd(&out.factors.x, &out.factors.y);
                // a fit whose observed-entry residual is no better than the
                // zero matrix has not converged in any useful sense; the
                // slice is completed at rank 0 like any other failed run.
                // The residual is measured on the SVD rebuild, not on the
                // solver's factors: near-singular factor pairs can keep a
                // small factored residual while their rebuilt product is
                // garbage, and the rebuild is what later stages consume.
                let rebuilt = rebuild_from_svd(&u, &s, &v, out.rank);
                let err = sm
                    .project_matrix(&rebuilt.sub(&dk))
                    .expect("slice dims match the mask")
                    .frobenius_norm();
                let ratio = err / dk.frobenius_norm();
                if ratio.is_finite() && ratio < 1.0 {
                    SliceFit { svd: Some((u, s, v)), rho: out.rank, iters: spent }
                } else {
                    SliceFit { svd: None, rho: 0, iters: spent }
                }
            }
            Err(_) => SliceFit { svd: None, rho: 0, iters: 0 },
        }
    });

    // Scatter ranks and singular values to all slices; mirrored slices pool
    // their partner's singular values so the global threshold weighs them.
    let mut rho = vec![0usize; n3];
    let mut iters = vec![0usize; n3];
    let mut sing: Vec<Vec<f64>> = vec![Vec::new(); n3];
    for (idx, fit) in stage1.iter().enumerate() {
        let k = active[idx];
        rho[k] = fit.rho;
        iters[k] = fit.iters;
        if let Some((_, s, _)) = &fit.svd {
            sing[k] = s.clone();
        }
    }
    if real_sym {
        for k in n3 / 2 + 1..n3 {
            let src = n3 - k;
            rho[k] = rho[src];
            sing[k] = sing[src].clone();
        }
    }

    let trunc = truncate_energy(&sing, cfg.gamma)?;

    // Stage 2: zero, rebuild, or warm-restart each active slice at its
    // reduced rank.
    let stage2: Vec<(Matrix, SliceStatus, usize, usize)> =
        par::map_indexed(active.len(), |idx| {
            let k = active[idx];
            let Some((u, s, v)) = &stage1[idx].svd else {
                return (Matrix::zeros(n1, n2), SliceStatus::ZeroedByThreshold, 0, 0);
            };
            let rho_k = stage1[idx].rho;
            let rho_star = trunc.keep[k].min(rho_k);
            if rho_star == 0 {
                (Matrix::zeros(n1, n2), SliceStatus::ZeroedByThreshold, 0, 0)
            } else if rho_star == rho_k {
                (rebuild_from_svd(u, s, v, rho_k), SliceStatus::Completed, rho_star, 0)
            } else {
                let x0 = Matrix::from_fn(n1, rho_star, |i, l| u.at(i, l) * s[l].sqrt());
                let y0 = Matrix::from_fn(rho_star, n2, |l, j| v.at(j, l).conj() * s[l].sqrt());
                let run = asd_core(
                    &d_hat.frontal(k),
                    csc.clone(),
                    &FactorPair { x: x0, y: y0 },
                    &cfg.looped.final_run,
                )
                .expect("restart configuration validated");
                (run.factors.product(), SliceStatus::WarmRestarted, rho_star, run.iters)
            }
        });

    let mut slices: Vec<Matrix> = (0..n3).map(|_| Matrix::zeros(n1, n2)).collect();
    let mut rho_star = vec![0usize; n3];
    let mut status = vec![SliceStatus::ZeroedByThreshold; n3];
    for (idx, (z, st, r, extra)) in stage2.into_iter().enumerate() {
        let k = active[idx];
        slices[k] = z;
        status[k] = st;
        rho_star[k] = r;
        iters[k] += extra;
    }
    if real_sym {
        for k in n3 / 2 + 1..n3 {
            let src = n3 - k;
            slices[k] = conj_matrix(&slices[src]);
            status[k] = status[src];
            rho_star[k] = rho_star[src];
        }
    }

    // Stage 3: optional zero-slice rule, applied simultaneously against the
    // post-truncation snapshot. Boundary slices consult their single
    // neighbor; the DC slice is never zeroed under the DFT.
    if cfg.zero_slice_rule && n3 >= 2 {
        let zero_before: Vec<bool> = rho_star.iter().map(|&r| r == 0).collect();
        for k in 0..n3 {
            if zero_before[k] {
                continue;
            }
            if transform.kind() == TransformKind::Dft && k == 0 {
                continue;
            }
            let left = k.checked_sub(1).map(|p| zero_before[p]).unwrap_or(true);
            let right = if k + 1 < n3 { zero_before[k + 1] } else { true };
            if left && right {
                slices[k] = Matrix::zeros(n1, n2);
                rho_star[k] = 0;
                status[k] = SliceStatus::ZeroedByRule;
            }
        }
    }

    // Stage 4: stack and transform back.
    let mut z_hat = Tensor3::zeros(n1, n2, n3);
    for (k, z) in slices.iter().enumerate() {
        z_hat.set_frontal(k, z);
    }
    let completed = transform.apply_inverse(&z_hat)?;

    let mut records = Vec::with_capacity(n3);
    for k in 0..n3 {
        let dk = d_hat.frontal(k);
        let err = sm.project_matrix(&slices[k].sub(&dk))?.frobenius_norm();
        records.push(SliceCompletionRecord {
            k: k + 1,
            rho_initial: rho[k],
            rho_reduced: rho_star[k],
            status: status[k],
            slice_rse_db: db_ratio(err, dk.frobenius_norm()),
            iters: iters[k],
        });
    }
    let profile = RankProfile {
        t_rank: rho_star.iter().copied().max().unwrap_or(0),
        multirank: rho_star,
        implicit: records.iter().map(|r| r.rho_reduced).sum(),
    };
    Ok(TasdiiOutcome { completed, records, profile })
}
