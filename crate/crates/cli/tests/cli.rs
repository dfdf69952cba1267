//! End-to-end runs of the binary over temporary files.

use std::path::Path;
use std::process::{Command, Output};

use starcomplete_core::metrics::{rse, rse_matrix};
use starcomplete_core::sampling::SamplingPattern;
use starcomplete_core::synth::{make_phantom, PhantomSpec};
use starcomplete_core::tasd::TensorFactorPair;
use starcomplete_core::tns1;
use starcomplete_core::transform::Transform;
use starcomplete_core::Tensor3;
use tempfile::TempDir;

fn starcomplete(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_starcomplete"))
        .args(args)
        .output()
        .expect("binary launches")
}

fn run_ok(args: &[&str]) -> String {
    let out = starcomplete(args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().expect("utf-8 temp path").to_owned()
}

#[test]
fn synth_sample_and_complete_tensor_round_trip() {
    let dir = TempDir::new().unwrap();
    let phantom = path(&dir, "phantom.tns1");
    let mask = path(&dir, "mask.tns1");
    let z = path(&dir, "z.tns1");
    let records = path(&dir, "records.csv");

    run_ok(&[
        "synth",
        "--energies", "24",
        "--rows", "12",
        "--cols", "6",
        "--materials", "2",
        "--seed", "5",
        "--out", &phantom,
    ]);
    let stdout = run_ok(&[
        "sample",
        "--n1", "24",
        "--n2", "12",
        "--n3", "6",
        "--pattern", "robust-raster",
        "--p", "0.4",
        "--seed", "7",
        "--out", &mask,
    ]);
    assert!(stdout.contains("ratio 0.4"), "unexpected sample summary: {stdout}");

    run_ok(&[
        "complete-tensor",
        "--in", &phantom,
        "--mask", &mask,
        "--algo", "tasdii",
        "--gamma", "0.999",
        "--transform", "dft",
        "--out", &z,
        "--records", &records,
        "--max-iters", "3000",
        "--tol", "1e-6",
    ]);

    let truth = tns1::read_tensor(&phantom).unwrap();
    let completed = tns1::read_tensor(&z).unwrap();
    let err = rse(&truth, &completed).unwrap();
    assert!(err <= -40.0, "slicewise completion RSE {err} dB");

    let text = std::fs::read_to_string(&records).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,rho_initial,rho_reduced,status,slice_rse_db,iters");
    assert_eq!(lines.len(), 7, "one row per slice:\n{text}");
    assert!(lines[1].starts_with("1,"));

    // The fixed-t-rank solver, on data matching its factor model; the
    // smooth phantom is too coherent for plain descent at this ratio.
    let trank2 = path(&dir, "trank2.tns1");
    let tr = Transform::dft(6);
    let low = TensorFactorPair::gaussian(24, 12, 6, 2, &tr, 17).unwrap().product().unwrap();
    tns1::write_tensor(&trank2, &low).unwrap();
    let z2 = path(&dir, "z2.tns1");
    run_ok(&[
        "complete-tensor",
        "--in", &trank2,
        "--mask", &mask,
        "--algo", "tasd",
        "--t", "2",
        "--transform", "dft",
        "--out", &z2,
        "--tol", "1e-6",
    ]);
    let second = tns1::read_tensor(&z2).unwrap();
    let err = rse(&low, &second).unwrap();
    assert!(err <= -40.0, "descent completion RSE {err} dB");
}

#[test]
fn complete_matrix_writes_the_estimate_and_its_trace() {
    let dir = TempDir::new().unwrap();
    let d_path = path(&dir, "d.tns1");
    let mask_path = path(&dir, "mask.tns1");
    let z_path = path(&dir, "z.tns1");
    let trace_path = path(&dir, "trace.csv");

    // rank-2 data: a two-material phantom flattened to 10×30
    let truth = make_phantom(&PhantomSpec::new(10, 6, 5, 2, 11)).unwrap().flatten();
    tns1::write_matrix(&d_path, &truth).unwrap();
    let omega = SamplingPattern::bernoulli_matrix(10, 30, 0.5, 13).unwrap();
    tns1::write_matrix(&mask_path, &omega.to_matrix().unwrap()).unwrap();

    let stdout = run_ok(&[
        "complete-matrix",
        "--in", &d_path,
        "--mask", &mask_path,
        "--algo", "asd",
        "--rank", "2",
        "--out", &z_path,
        "--trace", &trace_path,
        "--tol", "1e-7",
    ]);
    assert!(stdout.contains("rank 2"), "unexpected summary: {stdout}");

    let z = tns1::read_matrix(&z_path).unwrap();
    let err = rse_matrix(&truth, &z).unwrap();
    assert!(err <= -60.0, "completion RSE {err} dB");

    let text = std::fs::read_to_string(&trace_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iter,relative_residual,eta_x,eta_y");
    assert!(lines.len() >= 2, "trace has no rows:\n{text}");

    // Rank estimation lands on the true rank here.
    let stdout = run_ok(&[
        "complete-matrix",
        "--in", &d_path,
        "--mask", &mask_path,
        "--algo", "looped",
        "--rank", "auto",
        "--out", &z_path,
        "--tol", "1e-7",
    ]);
    assert!(stdout.contains("estimated rank 2"), "unexpected summary: {stdout}");
}

#[test]
fn sweep_emits_the_ledger_and_report_reduces_it() {
    let dir = TempDir::new().unwrap();
    let phantom = path(&dir, "phantom.tns1");
    let results = path(&dir, "results.csv");
    let curve = path(&dir, "curve.csv");

    run_ok(&[
        "synth",
        "--energies", "12",
        "--rows", "8",
        "--cols", "4",
        "--materials", "2",
        "--seed", "3",
        "--out", &phantom,
    ]);
    run_ok(&[
        "sweep",
        "--truth", &phantom,
        "--algo", "tasd",
        "--params", "2",
        "--p-grid", "0.5",
        "--seeds", "2",
        "--base-seed", "9",
        "--transform", "dft",
        "--out", &results,
    ]);

    let text = std::fs::read_to_string(&results).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "algo,param_name,param_value,p,seed_mask,seed_init,rse_db,exact,iters,wall_ms"
    );
    assert_eq!(lines.len(), 3, "two seeded runs:\n{text}");
    assert!(lines[1].starts_with("tasd,t,"));

    let stdout = run_ok(&["report", "--in", &results, "--out", &curve]);
    assert!(stdout.contains("wrote"));
    let curve_text = std::fs::read_to_string(&curve).unwrap();
    assert_eq!(curve_text.lines().next().unwrap(), "p,best_param,min_rse_db");
    assert_eq!(curve_text.lines().count(), 2);

    // Without --out the curve goes to stdout.
    let stdout = run_ok(&["report", "--in", &results]);
    assert!(stdout.starts_with("p,best_param,min_rse_db"));
}

#[test]
fn an_all_zero_input_leaves_a_zero_tensor_and_a_warning() {
    let dir = TempDir::new().unwrap();
    let d_path = path(&dir, "zero.tns1");
    let mask_path = path(&dir, "mask.tns1");
    let z_path = path(&dir, "z.tns1");

    tns1::write_tensor(&d_path, &Tensor3::zeros(10, 8, 4)).unwrap();
    let omega = SamplingPattern::robust_raster(10, 8, 4, 0.5, 21).unwrap();
    tns1::write_tensor(&mask_path, &omega.to_tensor().unwrap()).unwrap();

    let out = starcomplete(&[
        "complete-tensor",
        "--in", &d_path,
        "--mask", &mask_path,
        "--algo", "tasdii",
        "--gamma", "1.0",
        "--out", &z_path,
    ]);
    assert!(out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("warning"), "missing warning: {stderr}");
    let z = tns1::read_tensor(&z_path).unwrap();
    assert_eq!(z.frobenius_norm(), 0.0);
}

#[test]
fn contradictory_flags_are_rejected() {
    let dir = TempDir::new().unwrap();
    let d_path = path(&dir, "d.tns1");
    let mask_path = path(&dir, "mask.tns1");
    let z_path = path(&dir, "z.tns1");
    tns1::write_tensor(&d_path, &Tensor3::zeros(6, 5, 3)).unwrap();
    let omega = SamplingPattern::robust_raster(6, 5, 3, 0.5, 31).unwrap();
    tns1::write_tensor(&mask_path, &omega.to_tensor().unwrap()).unwrap();

    let base = ["complete-tensor", "--in", &d_path, "--mask", &mask_path, "--out", &z_path];

    // a gamma flag on the fixed-t-rank solver
    let mut args = base.to_vec();
    args.extend(["--algo", "tasd", "--t", "2", "--gamma", "0.9"]);
    let out = starcomplete(&args);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--gamma"));

    // the slicewise solver without gamma
    let mut args = base.to_vec();
    args.extend(["--algo", "tasdii"]);
    let out = starcomplete(&args);
    assert!(!out.status.success());

    // an unknown transform
    let mut args = base.to_vec();
    args.extend(["--algo", "tasd", "--t", "2", "--transform", "hadamard"]);
    let out = starcomplete(&args);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("hadamard"));

    // rank estimation is a looped-solver feature
    let m_path = path(&dir, "m.tns1");
    tns1::write_matrix(&m_path, &starcomplete_core::Matrix::zeros(6, 15)).unwrap();
    let mask2 = path(&dir, "mask2.tns1");
    let flat = SamplingPattern::bernoulli_matrix(6, 15, 0.5, 33).unwrap();
    tns1::write_matrix(&mask2, &flat.to_matrix().unwrap()).unwrap();
    let out = starcomplete(&[
        "complete-matrix",
        "--in", &m_path,
        "--mask", &mask2,
        "--algo", "asd",
        "--rank", "auto",
        "--out", &z_path,
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("integer"));
}
