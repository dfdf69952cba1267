//! End-to-end acceptance harness: ten numbered criteria covering the product
//! algebra, the four solvers, the samplers, and the sweep ledger. Each test
//! prints one `acceptance N: pass` line; tolerances and budgets are fixed
//! here and never adjusted to fit a failing run.

use std::time::Instant;

use starcomplete_core::algebra::{conj_transpose, mprod, ranks, tip, tsvdm};
use starcomplete_core::asd::{
    asd_random_init, looped_asd, AsdConfig, FactorPair, LoopedConfig, RankRule, StopReason,
};
use starcomplete_core::metrics::{rse, rse_matrix};
use starcomplete_core::rng::{self, split_seed};
use starcomplete_core::sampling::SamplingPattern;
use starcomplete_core::sweep::{run_cell, sweep, SweepAlgo, SweepConfig};
use starcomplete_core::synth::{make_phantom, multirank_tensor, PhantomSpec};
use starcomplete_core::tasd::{tasd, tasdii, TasdiiConfig, TensorFactorPair};
use starcomplete_core::tensor::{Matrix, Tensor3};
use starcomplete_core::transform::Transform;
use starcomplete_core::C64;

fn rel_diff(a: &Tensor3, b: &Tensor3) -> f64 {
    a.sub(b).frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

fn transform_for(i: usize, n3: usize) -> Transform {
    match i % 3 {
        0 => Transform::dft(n3),
        1 => Transform::dct(n3),
        _ => Transform::identity(n3),
    }
}

/// Applies `M` to every mode-3 tube by an explicit matrix-vector product.
fn hat_by_matvec(t: &Tensor3, m: &Matrix) -> Tensor3 {
    let (n1, n2, n3) = t.dims();
    Tensor3::from_fn(n1, n2, n3, |i, j, k| {
        (0..n3).map(|s| m.at(k, s) * t.at(i, j, s)).sum()
    })
}

/// Applies `M⁻¹ = Mᴴ/c²` to every mode-3 tube by an explicit product.
fn unhat_by_matvec(t: &Tensor3, m: &Matrix, c_sq: f64) -> Tensor3 {
    let (n1, n2, n3) = t.dims();
    Tensor3::from_fn(n1, n2, n3, |i, j, s| {
        let acc: C64 = (0..n3).map(|k| m.at(k, s).conj() * t.at(i, j, k)).sum();
        acc / c_sq
    })
}

/// The product written out index by index: transform each tube, multiply the
/// frontal slices with explicit triple loops, transform back.
fn product_by_index_formula(a: &Tensor3, b: &Tensor3, tr: &Transform) -> Tensor3 {
    let m = tr.matrix();
    let (n1, q, n3) = a.dims();
    let n2 = b.dims().1;
    let a_hat = hat_by_matvec(a, &m);
    let b_hat = hat_by_matvec(b, &m);
    let c_hat = Tensor3::from_fn(n1, n2, n3, |i, j, k| {
        (0..q).map(|l| a_hat.at(i, l, k) * b_hat.at(l, j, k)).sum()
    });
    unhat_by_matvec(&c_hat, &m, tr.scale_sq())
}

#[test]
fn criterion_01_product_algebra_matches_the_index_formula() {
    let start = Instant::now();
    let mut worst_prod = 0.0f64;
    let mut worst_recon = 0.0f64;
    let mut worst_ip = 0.0f64;
    for i in 0..50u64 {
        let mut dims_rng = rng::rng_from_seed(split_seed(0x0101, i));
        let pick = |r: &mut _| (rng::gaussian(r).abs() * 3.0) as usize % 8 + 1;
        let (n1, q, n2, n3) = (
            pick(&mut dims_rng),
            pick(&mut dims_rng),
            pick(&mut dims_rng),
            pick(&mut dims_rng),
        );
        let tr = transform_for(i as usize, n3);
        let mut ra = rng::rng_from_seed(split_seed(0x0102, i));
        let mut rb = rng::rng_from_seed(split_seed(0x0103, i));
        let a = rng::gaussian_tensor(&mut ra, n1, q, n3);
        let b = rng::gaussian_tensor(&mut rb, q, n2, n3);

        let fast = mprod(&a, &b, &tr).unwrap();
        let slow = product_by_index_formula(&a, &b, &tr);
        worst_prod = worst_prod.max(rel_diff(&fast, &slow));

        let svd = tsvdm(&a, &tr).unwrap();
        worst_recon = worst_recon.max(rel_diff(&svd.reconstruct().unwrap(), &a));

        let ip = tip(&a, &a, &tr).unwrap();
        let nsq = a.norm_sq();
        worst_ip = worst_ip
            .max((ip.re - nsq).abs() / nsq)
            .max(ip.im.abs() / nsq);
    }
    assert!(worst_prod <= 1e-11, "product vs index formula: {worst_prod:.3e}");
    assert!(worst_recon <= 1e-10, "decomposition reconstruction: {worst_recon:.3e}");
    assert!(worst_ip <= 1e-11, "inner product vs squared norm: {worst_ip:.3e}");
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 10.0, "took {secs:.1} s, budget 10 s");
    println!(
        "acceptance 1: pass — 50 tensors; product {worst_prod:.2e}, \
         reconstruction {worst_recon:.2e}, inner product {worst_ip:.2e}, {secs:.1} s"
    );
}

#[test]
fn criterion_02_tubal_rank_is_bounded_by_the_flattened_rank() {
    let tol = 1e-8;
    let mut checked = 0usize;
    for i in 0..20u64 {
        let (tensor, tr) = match i % 3 {
            // planted tubal rank: a product of two random factor tensors
            0 => {
                let n3 = 3 + (i as usize % 4);
                let tr = transform_for(i as usize, n3);
                let pair =
                    TensorFactorPair::gaussian(9, 8, n3, 1 + (i as usize % 4), &tr, split_seed(0x0201, i))
                        .unwrap();
                (pair.product().unwrap(), tr)
            }
            // planted flattened rank: every frontal slice mixes the same
            // few columns, so the flattening has exactly that many
            1 => {
                let mats = 1 + (i as usize % 4);
                let spec = PhantomSpec::new(10, 6, 5, mats, split_seed(0x0202, i));
                (make_phantom(&spec).unwrap(), transform_for(i as usize, 5))
            }
            // dense: both ranks saturate their dimension bounds
            _ => {
                let mut r = rng::rng_from_seed(split_seed(0x0203, i));
                let n3 = 2 + (i as usize % 5);
                (rng::gaussian_tensor(&mut r, 7, 9, n3), transform_for(i as usize, n3))
            }
        };
        let t_rank = ranks(&tensor, &tr, tol).unwrap().t_rank;
        let flat = tensor.flatten();
        let as_tensor = Tensor3::from_fn(flat.rows(), flat.cols(), 1, |i, j, _| flat.at(i, j));
        let flat_rank = ranks(&as_tensor, &Transform::identity(1), tol).unwrap().multirank[0];
        assert!(
            t_rank <= flat_rank,
            "construction {i}: tubal rank {t_rank} > flattened rank {flat_rank}"
        );
        checked += 1;
    }
    println!("acceptance 2: pass — {checked} constructions, zero violations at tol {tol:.0e}");
}

#[test]
fn criterion_03_global_energy_truncation_never_loses_to_tubewise() {
    let mut budgets = 0usize;
    for i in 0..20u64 {
        let mut r = rng::rng_from_seed(split_seed(0x0301, i));
        let (n1, n2, n3) = (6 + (i as usize % 3), 5 + (i as usize % 4), 3 + (i as usize % 5));
        let tr = transform_for(i as usize, n3);
        let a = rng::gaussian_tensor(&mut r, n1, n2, n3);
        let sing = tsvdm(&a, &tr).unwrap().singular_values().to_vec();

        let mut pooled: Vec<f64> = sing.iter().flatten().copied().collect();
        pooled.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let total: f64 = pooled.iter().map(|v| v * v).sum();

        for t in 1..=n1.min(n2) {
            // keeping the t leading values of every slice...
            let tube_err: f64 = sing
                .iter()
                .map(|s| s.iter().skip(t).map(|v| v * v).sum::<f64>())
                .sum();
            // ...versus the same number of values chosen by global energy
            let kept = sing.iter().map(|s| s.len().min(t)).sum::<usize>();
            let global_err: f64 = pooled.iter().skip(kept).map(|v| v * v).sum();
            assert!(
                global_err <= tube_err + 1e-12 * total,
                "tensor {i}, budget {t}: global {global_err:.6e} > tubewise {tube_err:.6e}"
            );
            budgets += 1;
        }
    }
    println!("acceptance 3: pass — 20 tensors, {budgets} budgets, zero violations");
}

#[test]
fn criterion_04_matrix_descent_converges_monotonically() {
    let start = Instant::now();
    let cfg = AsdConfig { max_iters: 1000, tol_residual: 1e-4, tol_stall: 1e-12, seed: 0 };
    let mut converged = 0usize;
    let mut rows = 0usize;
    for s in 0..20u64 {
        let truth = FactorPair::gaussian(50, 60, 3, split_seed(0x0401, s)).product();
        let omega =
            SamplingPattern::bernoulli_matrix(50, 60, 0.5, split_seed(0x0402, s)).unwrap();
        let mut run_cfg = cfg.clone();
        run_cfg.seed = split_seed(0x0403, s);
        let out = asd_random_init(&omega.project_matrix(&truth).unwrap(), &omega, 3, &run_cfg)
            .unwrap();
        if out.relative_residual <= 1e-4 {
            converged += 1;
        }
        for w in out.trace.windows(2) {
            // exact line search never increases the objective; the slack
            // only absorbs last-bit rounding in the incremental update
            let bound = w[0].relative_residual + 1e-12 * (1.0 + w[0].relative_residual);
            assert!(
                w[1].relative_residual <= bound,
                "seed {s}, iteration {}: residual rose {} -> {}",
                w[1].iter,
                w[0].relative_residual,
                w[1].relative_residual
            );
            rows += 1;
        }
    }
    assert!(converged >= 19, "{converged}/20 runs reached 1e-4 within 1000 iterations");
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 30.0, "took {secs:.1} s, budget 30 s");
    println!(
        "acceptance 4: pass — {converged}/20 converged, monotone over {rows} recorded \
         iterations, {secs:.1} s"
    );
}

#[test]
fn criterion_05_rank_growth_recovers_the_planted_rank() {
    let mut hits = 0usize;
    let mut worst_rse = f64::NEG_INFINITY;
    for s in 0..20u64 {
        let truth = FactorPair::gaussian(40, 50, 3, split_seed(0x0501, s)).product();
        let omega =
            SamplingPattern::bernoulli_matrix(40, 50, 0.5, split_seed(0x0502, s)).unwrap();
        let mut cfg = LoopedConfig::auto(8, split_seed(0x0503, s));
        cfg.final_run =
            AsdConfig { max_iters: 8000, tol_residual: 1e-7, tol_stall: 1e-12, seed: 0 };
        let out = looped_asd(&omega.project_matrix(&truth).unwrap(), &omega, &cfg).unwrap();
        if out.rank == 3 {
            hits += 1;
            let err = rse_matrix(&truth, &out.factors.product()).unwrap();
            worst_rse = worst_rse.max(err);
            assert!(err <= -80.0, "seed {s}: rank hit but RSE {err:.1} dB");
        }
    }
    assert!(hits >= 18, "estimated rank 3 on only {hits}/20 seeds");
    println!(
        "acceptance 5: pass — rank 3 on {hits}/20 seeds, worst success RSE {worst_rse:.1} dB"
    );
}

#[test]
fn criterion_06_tensor_descent_gradient_steps_and_drift() {
    // (a) analytic directional derivative vs central difference; the
    // objective is quadratic along any fixed direction, so the difference
    // quotient is exact up to rounding.
    let mut worst_grad = 0.0f64;
    for i in 0..20u64 {
        let n3 = 4 + (i as usize % 3);
        let tr = transform_for(i as usize, n3);
        let t = 2 + (i as usize % 3);
        let point = TensorFactorPair::gaussian(12, 10, n3, t, &tr, split_seed(0x0601, i)).unwrap();
        let dir = TensorFactorPair::gaussian(12, 10, n3, t, &tr, split_seed(0x0602, i)).unwrap();
        let mut rd = rng::rng_from_seed(split_seed(0x0603, i));
        let d = rng::gaussian_tensor(&mut rd, 12, 10, n3);
        let omega =
            SamplingPattern::bernoulli_tensor(12, 10, n3, 0.5, split_seed(0x0604, i)).unwrap();
        let masked = omega.project_tensor(&d).unwrap();

        let objective = |x: &Tensor3, y: &Tensor3| {
            let fit = omega.project_tensor(&mprod(x, y, &tr).unwrap()).unwrap();
            0.5 * masked.sub(&fit).norm_sq()
        };
        let shift = |base: &Tensor3, v: &Tensor3, h: f64| {
            let mut out = base.clone();
            out.axpy(C64::new(h, 0.0), v);
            out
        };
        let resid = masked.sub(&omega.project_tensor(&point.product().unwrap()).unwrap());
        let g_x = mprod(&resid, &conj_transpose(&point.y, &tr).unwrap(), &tr).unwrap();
        let g_y = mprod(&conj_transpose(&point.x, &tr).unwrap(), &resid, &tr).unwrap();
        let h = 1e-3;
        for (num, ana) in [
            (
                (objective(&shift(&point.x, &dir.x, h), &point.y)
                    - objective(&shift(&point.x, &dir.x, -h), &point.y))
                    / (2.0 * h),
                -tip(&g_x, &dir.x, &tr).unwrap().re,
            ),
            (
                (objective(&point.x, &shift(&point.y, &dir.y, h))
                    - objective(&point.x, &shift(&point.y, &dir.y, -h)))
                    / (2.0 * h),
                -tip(&g_y, &dir.y, &tr).unwrap().re,
            ),
        ] {
            worst_grad = worst_grad.max((num - ana).abs() / ana.abs().max(1.0));
        }
    }
    assert!(worst_grad <= 1e-6, "gradient check: {worst_grad:.3e}");

    // (b) the step size is the exact minimizer along the staged direction:
    // the derivative of the one-dimensional restriction vanishes at the
    // step the solver reports.
    let mut worst_stat = 0.0f64;
    let mut worst_eta = 0.0f64;
    for i in 0..10u64 {
        let tr = Transform::dft(6);
        let point = TensorFactorPair::gaussian(14, 12, 6, 2, &tr, split_seed(0x0611, i)).unwrap();
        let mut rd = rng::rng_from_seed(split_seed(0x0612, i));
        let d = rng::gaussian_tensor(&mut rd, 14, 12, 6);
        let omega =
            SamplingPattern::robust_raster(14, 12, 6, 0.5, split_seed(0x0613, i)).unwrap();
        let masked = omega.project_tensor(&d).unwrap();
        let complex_dot = |a: &Tensor3, b: &Tensor3| -> f64 {
            a.data().iter().zip(b.data()).map(|(x, y)| (x.conj() * y).re).sum()
        };
        let line = |resid: &Tensor3, w: &Tensor3, eta: f64| {
            let mut step = w.clone();
            step.scale(C64::new(eta, 0.0));
            0.5 * resid.sub(&step).norm_sq()
        };

        // X stage from the starting point
        let resid = masked.sub(&omega.project_tensor(&point.product().unwrap()).unwrap());
        let g_x = mprod(&resid, &conj_transpose(&point.y, &tr).unwrap(), &tr).unwrap();
        let w_x = omega.project_tensor(&mprod(&g_x, &point.y, &tr).unwrap()).unwrap();
        let eta_x = complex_dot(&resid, &w_x) / w_x.norm_sq();
        let h = 1e-3 * (1.0 + eta_x.abs());
        let slope = (line(&resid, &w_x, eta_x + h) - line(&resid, &w_x, eta_x - h)) / (2.0 * h);
        worst_stat = worst_stat.max(slope.abs() / line(&resid, &w_x, 0.0));

        // Y stage from the updated left factor
        let mut x1 = point.x.clone();
        x1.axpy(C64::new(eta_x, 0.0), &g_x);
        let fit1 = omega.project_tensor(&mprod(&x1, &point.y, &tr).unwrap()).unwrap();
        let resid1 = masked.sub(&fit1);
        let g_y = mprod(&conj_transpose(&x1, &tr).unwrap(), &resid1, &tr).unwrap();
        let w_y = omega.project_tensor(&mprod(&x1, &g_y, &tr).unwrap()).unwrap();
        let eta_y = complex_dot(&resid1, &w_y) / w_y.norm_sq();
        let hy = 1e-3 * (1.0 + eta_y.abs());
        let slope_y =
            (line(&resid1, &w_y, eta_y + hy) - line(&resid1, &w_y, eta_y - hy)) / (2.0 * hy);
        worst_stat = worst_stat.max(slope_y.abs() / line(&resid1, &w_y, 0.0));

        // and the solver takes exactly these steps on its first sweep
        // (trace row 0 is the starting state; the step lands in row 1)
        let one = AsdConfig { max_iters: 1, tol_residual: 1e-300, tol_stall: 1e-300, seed: 0 };
        let out = tasd(&masked, &omega, &point, &one).unwrap();
        worst_eta = worst_eta
            .max((out.trace[1].eta_x - eta_x).abs() / eta_x.abs())
            .max((out.trace[1].eta_y - eta_y).abs() / eta_y.abs());
    }
    assert!(worst_stat <= 1e-6, "stationarity check: {worst_stat:.3e}");
    assert!(worst_eta <= 1e-6, "reported steps vs closed form: {worst_eta:.3e}");

    // (c) the incrementally tracked residual does not drift from the truth
    // over a long overfit run.
    let tr = Transform::dft(8);
    let clean = TensorFactorPair::gaussian(30, 30, 8, 2, &tr, 0x0621)
        .unwrap()
        .product()
        .unwrap();
    let mut rn = rng::rng_from_seed(0x0622);
    let mut noise = rng::gaussian_tensor(&mut rn, 30, 30, 8);
    noise.scale(C64::new(-0.01 * clean.frobenius_norm() / noise.frobenius_norm(), 0.0));
    let noisy = clean.sub(&noise);
    let omega = SamplingPattern::robust_raster(30, 30, 8, 0.5, 0x0623).unwrap();
    let masked = omega.project_tensor(&noisy).unwrap();
    let forced = AsdConfig { max_iters: 500, tol_residual: 1e-300, tol_stall: 1e-300, seed: 0 };
    let init = TensorFactorPair::gaussian(30, 30, 8, 4, &tr, 0x0624).unwrap();
    let out = tasd(&masked, &omega, &init, &forced).unwrap();
    assert_eq!(out.iters, 500);
    let fit = omega.project_tensor(&out.factors.product().unwrap()).unwrap();
    let direct = masked.sub(&fit).frobenius_norm() / masked.frobenius_norm();
    let drift = (direct - out.relative_residual).abs();
    assert!(drift <= 1e-8, "residual drift after 500 iterations: {drift:.3e}");

    // (d) exact completion of planted tubal-rank-2 data.
    let mut done = 0usize;
    for s in 0..20u64 {
        let truth = TensorFactorPair::gaussian(30, 30, 8, 2, &tr, split_seed(0x0631, s))
            .unwrap()
            .product()
            .unwrap();
        let omega =
            SamplingPattern::robust_raster(30, 30, 8, 0.5, split_seed(0x0632, s)).unwrap();
        let cfg = AsdConfig {
            max_iters: 4000,
            tol_residual: 1e-6,
            tol_stall: 1e-12,
            seed: split_seed(0x0633, s),
        };
        let out =
            tasd(&omega.project_tensor(&truth).unwrap(), &omega, &random_point(&truth, 2, &tr, cfg.seed), &cfg)
                .unwrap();
        let err = rse(&truth, &out.factors.product().unwrap()).unwrap();
        if out.stop == StopReason::Converged && err <= -60.0 {
            done += 1;
        }
    }
    assert!(done >= 18, "exact completion on only {done}/20 seeds");
    println!(
        "acceptance 6: pass — gradient {worst_grad:.2e}, stationarity {worst_stat:.2e}, \
         steps {worst_eta:.2e}, drift {drift:.2e}, completion {done}/20"
    );
}

fn random_point(truth: &Tensor3, t: usize, tr: &Transform, seed: u64) -> TensorFactorPair {
    let (n1, n2, n3) = truth.dims();
    TensorFactorPair::gaussian(n1, n2, n3, t, tr, seed).unwrap()
}

fn slicewise_cfg(gamma: f64, seed: u64) -> TasdiiConfig {
    let mut cfg = TasdiiConfig::new(gamma, seed);
    cfg.looped.rank = RankRule::Auto { r_max: 6 };
    cfg.looped.inner = AsdConfig { max_iters: 1500, tol_residual: 1e-4, tol_stall: 1e-6, seed: 0 };
    cfg.looped.final_run =
        AsdConfig { max_iters: 8000, tol_residual: 1e-7, tol_stall: 1e-12, seed: 0 };
    cfg
}

#[test]
fn criterion_07_slicewise_completion_reduces_and_recovers() {
    // (a) one slice under the identity transform is the matrix pipeline:
    // both sides draw the same seed and must agree.
    let mut worst_match = 0.0f64;
    for s in 0..5u64 {
        let truth_m = FactorPair::gaussian(30, 25, 3, split_seed(0x0701, s)).product();
        let truth = Tensor3::from_fn(30, 25, 1, |i, j, _| truth_m.at(i, j));
        let omega =
            SamplingPattern::bernoulli_tensor(30, 25, 1, 0.5, split_seed(0x0702, s)).unwrap();
        let masked = omega.project_tensor(&truth).unwrap();
        let mut cfg = slicewise_cfg(1.0, split_seed(0x0703, s));
        cfg.looped.rank = RankRule::Auto { r_max: 6 };
        let out = tasdii(&masked, &omega, &Transform::identity(1), &cfg).unwrap();

        let mut lcfg = cfg.looped.clone();
        lcfg.seed = split_seed(cfg.looped.seed, 0);
        let matrix_out =
            looped_asd(&masked.frontal(0), &omega.flatten(), &lcfg).unwrap();
        let reference = matrix_out.factors.product();
        let diff = out.completed.frontal(0).sub(&reference).frobenius_norm()
            / reference.frobenius_norm();
        worst_match = worst_match.max(diff);
    }
    assert!(worst_match <= 1e-10, "matrix pipeline mismatch: {worst_match:.3e}");

    // (b) noiseless per-slice ranks (3, 2, 1, 0, ...) recovered through the
    // full pipeline at full energy retention.
    let tr = Transform::dft(16);
    let mut ranks_spec = vec![0usize; 16];
    ranks_spec[0] = 3;
    ranks_spec[1] = 2;
    ranks_spec[2] = 1;
    let mut clean_hits = 0usize;
    for s in 0..20u64 {
        let clean = multirank_tensor(40, 40, 16, &ranks_spec, &tr, split_seed(0x0711, s)).unwrap();
        let omega =
            SamplingPattern::robust_raster(40, 40, 16, 0.3, split_seed(0x0712, s)).unwrap();
        let cfg = slicewise_cfg(1.0, split_seed(0x0713, s));
        let out = tasdii(&omega.project_tensor(&clean).unwrap(), &omega, &tr, &cfg).unwrap();
        if rse(&clean, &out.completed).unwrap() <= -80.0 {
            clean_hits += 1;
        }
    }
    assert!(clean_hits >= 18, "noiseless recovery on only {clean_hits}/20 seeds");

    // (c) with measurement noise the error lands on the noise floor: the
    // residual against the noisy truth cannot beat the unfittable noise,
    // and a successful completion does not sit above it either.
    let sigma = 1e-2;
    let mut noisy_hits = 0usize;
    let mut worst_gap = 0.0f64;
    for s in 0..20u64 {
        let clean = multirank_tensor(40, 40, 16, &ranks_spec, &tr, split_seed(0x0721, s)).unwrap();
        let mut rn = rng::rng_from_seed(split_seed(0x0722, s));
        let mut noise = rng::gaussian_tensor(&mut rn, 40, 40, 16);
        noise.scale(C64::new(-sigma * clean.frobenius_norm() / noise.frobenius_norm(), 0.0));
        let noisy = clean.sub(&noise);
        let floor_db =
            20.0 * (sigma * clean.frobenius_norm() / noisy.frobenius_norm()).log10();
        let omega =
            SamplingPattern::robust_raster(40, 40, 16, 0.3, split_seed(0x0723, s)).unwrap();
        let cfg = slicewise_cfg(0.999, split_seed(0x0724, s));
        let out = tasdii(&omega.project_tensor(&noisy).unwrap(), &omega, &tr, &cfg).unwrap();
        let err = rse(&noisy, &out.completed).unwrap();
        let gap = (err - floor_db).abs();
        if gap <= 3.0 {
            noisy_hits += 1;
            worst_gap = worst_gap.max(gap);
        }
    }
    assert!(noisy_hits >= 18, "noise-floor recovery on only {noisy_hits}/20 seeds");
    println!(
        "acceptance 7: pass — pipeline match {worst_match:.2e}, noiseless {clean_hits}/20, \
         noisy {noisy_hits}/20 within 3 dB of the floor (worst gap {worst_gap:.2} dB)"
    );
}

#[test]
fn criterion_08_slicewise_beats_plain_descent_on_the_noisy_phantom() {
    let start = Instant::now();
    let tr = Transform::dft(40);
    let t_grid = [1.0, 2.0, 3.0, 4.0, 5.0];
    let gamma_grid = [0.999, 0.99, 1.0];

    let mut cfg = SweepConfig::new(1, 0);
    cfg.asd = AsdConfig { max_iters: 2500, tol_residual: 1e-4, tol_stall: 1e-6, seed: 0 };
    cfg.tasdii = TasdiiConfig::new(1.0, 0);
    cfg.tasdii.looped.rank = RankRule::Auto { r_max: 5 };
    cfg.tasdii.looped.inner =
        AsdConfig { max_iters: 1200, tol_residual: 1e-4, tol_stall: 1e-6, seed: 0 };
    cfg.tasdii.looped.final_run =
        AsdConfig { max_iters: 2500, tol_residual: 1e-5, tol_stall: 1e-8, seed: 0 };

    // One fixed dataset; the Monte Carlo is over mask and initialization
    // draws, as it would be for a measured volume.
    let spec = PhantomSpec::new(152, 40, 40, 3, split_seed(0x0801, 0)).with_noise(1e-2);
    let truth = make_phantom(&spec).unwrap();

    let mut wins = 0usize;
    let mut hits = 0usize;
    let mut gaps = Vec::with_capacity(20);
    for s in 0..20u64 {
        let seed_mask = split_seed(0x0802, s);
        let seed_init = split_seed(0x0803, s);

        let tasd_best = t_grid
            .iter()
            .map(|&t| {
                run_cell(SweepAlgo::Tasd, &truth, &tr, t, 0.1, seed_mask, seed_init, &cfg)
                    .unwrap()
                    .rse_db
            })
            .fold(f64::INFINITY, f64::min);
        let tasdii_best = gamma_grid
            .iter()
            .map(|&g| {
                run_cell(SweepAlgo::Tasdii, &truth, &tr, g, 0.1, seed_mask, seed_init, &cfg)
                    .unwrap()
                    .rse_db
            })
            .fold(f64::INFINITY, f64::min);

        if tasdii_best <= tasd_best - 3.0 {
            wins += 1;
        }
        if tasdii_best <= -15.0 {
            hits += 1;
        }
        gaps.push(tasd_best - tasdii_best);
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let secs = start.elapsed().as_secs_f64();
    assert!(wins >= 11, "slicewise won by 3 dB on only {wins}/20 seeds");
    assert!(hits >= 11, "slicewise reached -15 dB on only {hits}/20 seeds");
    assert!(secs < 900.0, "took {secs:.0} s, budget 900 s");
    println!(
        "acceptance 8: pass — 3 dB wins {wins}/20, -15 dB reached {hits}/20, \
         median margin {:.1} dB, {secs:.0} s",
        gaps[10]
    );
}

#[test]
fn criterion_09_sampling_ratio_and_row_coverage_statistics() {
    // Bernoulli: the grand mean over 1000 masks stays within three standard
    // errors of p.
    let (rows, cols, p) = (100usize, 100usize, 0.3f64);
    let n_seeds = 1000u64;
    let mut sum = 0.0;
    for seed in 0..n_seeds {
        sum += SamplingPattern::bernoulli_matrix(rows, cols, p, seed)
            .unwrap()
            .realized_ratio();
    }
    let mean = sum / n_seeds as f64;
    let three_sigma =
        3.0 * (p * (1.0 - p) / (rows * cols * n_seeds as usize) as f64).sqrt();
    assert!(
        (mean - p).abs() <= three_sigma,
        "Bernoulli grand mean {mean:.6} vs p {p} (3σ = {three_sigma:.2e})"
    );

    // Robust raster at the critical ratio: every horizontal slice keeps at
    // least one observed entry on every seed.
    let (n1, n2, n3, pr) = (20usize, 10usize, 10usize, 0.1f64);
    for seed in 0..n_seeds {
        let mask = SamplingPattern::robust_raster(n1, n2, n3, pr, seed).unwrap();
        let m = mask.mask();
        for i in 0..n1 {
            let covered = (0..n2 * n3).any(|jk| m[i + jk * n1]);
            assert!(covered, "seed {seed}: horizontal slice {i} has no observed entry");
        }
    }
    println!(
        "acceptance 9: pass — Bernoulli mean off by {:.1e} (3σ = {three_sigma:.1e}); \
         1000 robust-raster masks, every horizontal slice covered",
        (mean - p).abs()
    );
}

#[test]
fn criterion_10_sweep_ledger_reruns_identically_across_thread_counts() {
    let tr = Transform::dft(6);
    let truth = multirank_tensor(20, 16, 6, &[2, 1, 1, 0, 0, 0], &tr, 0x0a01).unwrap();

    let mut cfg = SweepConfig::new(2, 0x0a02);
    cfg.asd = AsdConfig { max_iters: 1500, tol_residual: 1e-5, tol_stall: 1e-8, seed: 0 };
    cfg.tasdii.looped.rank = RankRule::Auto { r_max: 4 };
    cfg.tasdii.looped.inner =
        AsdConfig { max_iters: 800, tol_residual: 1e-4, tol_stall: 1e-6, seed: 0 };
    cfg.tasdii.looped.final_run =
        AsdConfig { max_iters: 2000, tol_residual: 1e-6, tol_stall: 1e-10, seed: 0 };

    let mut replayed = 0usize;
    for (algo, params) in
        [(SweepAlgo::Tasdii, vec![0.9, 1.0]), (SweepAlgo::Asd, vec![2.0])]
    {
        let result = sweep(algo, &truth, &tr, &params, &[0.4], &cfg).unwrap();
        let parsed = starcomplete_core::sweep::parse_csv(&result.to_csv()).unwrap();
        assert_eq!(parsed, result.runs);
        for row in &parsed {
            for width in [1usize, 3] {
                let mut run_cfg = cfg.clone();
                run_cfg.tasdii.threads = Some(width);
                let again = run_cell(
                    row.algo,
                    &truth,
                    &tr,
                    row.param_value,
                    row.p,
                    row.seed_mask,
                    row.seed_init,
                    &run_cfg,
                )
                .unwrap();
                assert!(
                    (again.rse_db - row.rse_db).abs() <= 1e-12,
                    "{} rerun at {} threads drifted: {} vs {}",
                    row.algo,
                    width,
                    again.rse_db,
                    row.rse_db
                );
                assert_eq!(again.exact, row.exact);
                assert_eq!(again.iters, row.iters);
                replayed += 1;
            }
        }
    }
    println!(
        "acceptance 10: pass — {replayed} ledger replays at widths 1 and 3, \
         all within 1e-12"
    );
}
