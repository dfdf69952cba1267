//! Monte-Carlo and timing checks that need many seeds or wall-clock
//! measurements, kept out of the unit suites.

use std::time::{Duration, Instant};

use starcomplete_core::asd::{asd, AsdConfig, FactorPair};
use starcomplete_core::sampling::SamplingPattern;

#[test]
fn bernoulli_mean_ratio_over_a_thousand_seeds() {
    let p = 0.3;
    let seeds = 1000;
    let mean = (0..seeds)
        .map(|s| SamplingPattern::bernoulli_matrix(100, 100, p, s).unwrap().realized_ratio())
        .sum::<f64>()
        / seeds as f64;
    assert!((mean - p).abs() <= 0.005, "mean realized ratio {mean}");
}

/// With whole tubes drawn per (row, column) coin flip, losing every tube of
/// a row is vastly more likely than losing every entry of that row under
/// entrywise sampling at the same ratio.
#[test]
fn raster_loses_whole_rows_far_more_often_than_bernoulli() {
    let (n1, n2, n3) = (50, 20, 20);
    let p = 0.1;
    let seeds = 10_000;

    let empty_row = |pattern: &SamplingPattern| -> bool {
        let mask = pattern.mask();
        (0..n1).any(|i| {
            !(0..n2 * n3).any(|jk| mask[i + jk * n1])
        })
    };

    let mut raster_hits = 0;
    let mut bernoulli_hits = 0;
    for seed in 0..seeds {
        if empty_row(&SamplingPattern::raster(n1, n2, n3, p, seed).unwrap()) {
            raster_hits += 1;
        }
        if empty_row(&SamplingPattern::bernoulli_tensor(n1, n2, n3, p, seed).unwrap()) {
            bernoulli_hits += 1;
        }
    }

    assert!(
        raster_hits > bernoulli_hits,
        "raster lost rows in {raster_hits} of {seeds} seeds, bernoulli in {bernoulli_hits}"
    );
    // the gap is dramatic, not marginal: each raster row survives 20 coin
    // flips, each bernoulli row 400
    assert!(raster_hits >= seeds / 2, "raster row loss should dominate: {raster_hits}");
    assert!(bernoulli_hits <= seeds / 100, "bernoulli row loss should be rare: {bernoulli_hits}");
}

/// Doubling the observed set roughly doubles the per-iteration cost; the
/// fixed-rank terms are negligible at this size.
#[test]
fn asd_iteration_cost_scales_with_the_observed_set() {
    let (rows, cols, r) = (400, 400, 6);
    let truth = FactorPair::gaussian(rows, cols, r, 3).product();
    // unreachable tolerances pin both runs to the full iteration budget
    let cfg = AsdConfig { max_iters: 80, tol_residual: 1e-300, tol_stall: 1e-300, seed: 0 };

    let time_at = |p: f64| -> Duration {
        let omega = SamplingPattern::bernoulli_matrix(rows, cols, p, 7).unwrap();
        let observed = omega.project_matrix(&truth).unwrap();
        let init = FactorPair::gaussian(rows, cols, r, 11);
        // warm up, then keep the fastest of three measured runs
        asd(&observed, &omega, &init, &cfg).unwrap();
        (0..3)
            .map(|_| {
                let start = Instant::now();
                asd(&observed, &omega, &init, &cfg).unwrap();
                start.elapsed()
            })
            .min()
            .unwrap()
    };

    let half = time_at(0.25).as_secs_f64();
    let full = time_at(0.5).as_secs_f64();
    let ratio = full / half;
    assert!((1.6..=2.6).contains(&ratio), "doubling |Omega| changed cost by {ratio:.2}x");
}
