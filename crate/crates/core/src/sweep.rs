//! Reproducible parameter sweeps for the completion solvers.
//!
//! A sweep drives one algorithm over a grid of (parameter, undersampling
//! ratio) cells: the parameter axis is the completion rank `r` for the
//! matrix solvers, the factor t-rank `t` for the tensor descent solver,
//! and the energy threshold `gamma` for the slicewise solver. Every cell
//! is completed `n_seeds` times with a fresh robust-raster mask and fresh
//! starting factors, and every run is logged with both of its seeds, so
//! any row of the emitted CSV can be re-executed on its own with
//! [`run_cell`] and reproduces the logged error.
//!
//! Runs execute on the work pool, but their seeds derive from the base
//! seed and the run's grid position alone, and rows are collected in grid
//! order, so the ledger is independent of scheduling. Floats are written
//! with 17 significant digits, which round-trips `f64` exactly.
//!
//! A run whose solver reports an error is not fatal to the sweep: the row
//! is logged with the score of the zero estimate (0 dB, zero iterations)
//! and the failure is counted in its cell's statistics.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use crate::asd::{asd_random_init, looped_asd, AsdConfig, LoopedConfig, RankRule};
use crate::error::{Error, Result};
use crate::metrics::{rse, rse_for_csv, rse_matrix};
use crate::par;
use crate::rng::split_seed;
use crate::sampling::SamplingPattern;
use crate::tasd::{tasd_random_init, tasdii, TasdiiConfig};
use crate::tensor::Tensor3;
use crate::transform::Transform;

/// Which solver a sweep drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAlgo {
    /// Plain alternating steepest descent on the flattened tensor.
    Asd,
    /// Fixed-rank looped completion on the flattened tensor.
    LoopedAsd,
    /// Tensor alternating steepest descent at a fixed t-rank.
    Tasd,
    /// Slicewise completion with energy thresholding.
    Tasdii,
}

impl SweepAlgo {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAlgo::Asd => "asd",
            SweepAlgo::LoopedAsd => "looped-asd",
            SweepAlgo::Tasd => "tasd",
            SweepAlgo::Tasdii => "tasdii",
        }
    }

    /// Name of the swept parameter column.
    pub fn param_name(&self) -> &'static str {
        match self {
            SweepAlgo::Asd | SweepAlgo::LoopedAsd => "r",
            SweepAlgo::Tasd => "t",
            SweepAlgo::Tasdii => "gamma",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "asd" => Ok(SweepAlgo::Asd),
            "looped-asd" => Ok(SweepAlgo::LoopedAsd),
            "tasd" => Ok(SweepAlgo::Tasd),
            "tasdii" => Ok(SweepAlgo::Tasdii),
            other => Err(Error::arg("sweep", format!("unknown algorithm {other:?}"))),
        }
    }

    fn check_param(&self, v: f64) -> Result<()> {
        let ok = match self {
            SweepAlgo::Asd | SweepAlgo::LoopedAsd | SweepAlgo::Tasd => {
                v.is_finite() && v >= 1.0 && v.fract() == 0.0
            }
            SweepAlgo::Tasdii => v.is_finite() && v > 0.0 && v <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::arg(
                "sweep",
                format!("{} is not a valid {} value", v, self.param_name()),
            ))
        }
    }
}

impl fmt::Display for SweepAlgo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One completion run — a single row of the sweep ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub algo: SweepAlgo,
    pub param_value: f64,
    pub p: f64,
    pub seed_mask: u64,
    pub seed_init: u64,
    /// Recovery error in dB; exact recoveries are floored and flagged.
    pub rse_db: f64,
    pub exact: bool,
    pub iters: usize,
    pub wall_ms: f64,
}

/// Seed-aggregated statistics of one (parameter, p) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStat {
    pub param_value: f64,
    pub p: f64,
    pub n_runs: usize,
    /// Runs whose solver errored; they enter the statistics at 0 dB.
    pub failed_runs: usize,
    pub mean_rse_db: f64,
    pub min_rse_db: f64,
    pub std_rse_db: f64,
}

/// One point of the minimal-error curve: the parameter with the lowest
/// seed-averaged error at a given undersampling ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct BestCell {
    pub p: f64,
    pub best_param: f64,
    pub min_rse_db: f64,
}

/// Solver settings shared by every run of a sweep.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub n_seeds: usize,
    pub base_seed: u64,
    /// Stopping rules for the plain matrix and tensor descent runs.
    pub asd: AsdConfig,
    /// Template for the fixed-rank looped runs; the rank and the seed are
    /// replaced per run.
    pub looped: LoopedConfig,
    /// Template for the slicewise runs; `gamma` and the seed are replaced
    /// per run.
    pub tasdii: TasdiiConfig,
}

impl SweepConfig {
    pub fn new(n_seeds: usize, base_seed: u64) -> Self {
        SweepConfig {
            n_seeds,
            base_seed,
            asd: AsdConfig::default(),
            looped: LoopedConfig::fixed(1, 0),
            tasdii: TasdiiConfig::new(1.0, 0),
        }
    }
}

/// A sweep with aggregates; `runs` is ordered parameter-major, then by
/// undersampling ratio, then by seed, so each cell's rows are adjacent.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub algo: SweepAlgo,
    pub param_grid: Vec<f64>,
    pub p_grid: Vec<f64>,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub runs: Vec<RunRecord>,
    pub cells: Vec<CellStat>,
}

impl SweepResult {
    /// The minimal-error curve over the parameter axis, one point per p.
    pub fn best_by_p(&self) -> Vec<BestCell> {
        best_by_p(&self.cells)
    }

    pub fn to_csv(&self) -> String {
        runs_to_csv(&self.runs)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// The default undersampling grid, `0.05` to `0.5` in steps of `0.05`.
pub fn default_p_grid() -> Vec<f64> {
    (1..=10).map(|i| i as f64 * 0.05).collect()
}

/// The default parameter grid for an algorithm: ranks `1..=10` for the
/// rank axes, `{0.9, 0.99, 0.999, 0.9999, 1}` for the energy threshold.
pub fn default_param_grid(algo: SweepAlgo) -> Vec<f64> {
    match algo {
        SweepAlgo::Asd | SweepAlgo::LoopedAsd | SweepAlgo::Tasd => {
            (1..=10).map(|r| r as f64).collect()
        }
        SweepAlgo::Tasdii => vec![0.9, 0.99, 0.999, 0.9999, 1.0],
    }
}

/// Runs one completion exactly as a sweep would and scores it against the
/// ground truth. This is the re-runner behind the seed ledger: calling it
/// with the values of any successful CSV row reproduces that row's error.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    algo: SweepAlgo,
    truth: &Tensor3,
    transform: &Transform,
    param_value: f64,
    p: f64,
    seed_mask: u64,
    seed_init: u64,
    cfg: &SweepConfig,
) -> Result<RunRecord> {
    algo.check_param(param_value)?;
    let (n1, n2, n3) = truth.dims();
    let start = Instant::now();
    let omega = SamplingPattern::robust_raster(n1, n2, n3, p, seed_mask)?;
    let observed = omega.project_tensor(truth)?;
    let (raw_rse, iters) = match algo {
        SweepAlgo::Asd => {
            let mut acfg = cfg.asd.clone();
            acfg.seed = seed_init;
            let out =
                asd_random_init(&observed.flatten(), &omega.flatten(), param_value as usize, &acfg)?;
            (rse_matrix(&truth.flatten(), &out.factors.product())?, out.iters)
        }
        SweepAlgo::LoopedAsd => {
            let mut lcfg = cfg.looped.clone();
            lcfg.rank = RankRule::Fixed { r: param_value as usize };
            lcfg.seed = seed_init;
            let out = looped_asd(&observed.flatten(), &omega.flatten(), &lcfg)?;
            (rse_matrix(&truth.flatten(), &out.factors.product())?, out.inner_iters + out.iters)
        }
        SweepAlgo::Tasd => {
            let mut acfg = cfg.asd.clone();
            acfg.seed = seed_init;
            let out = tasd_random_init(&observed, &omega, param_value as usize, transform, &acfg)?;
            (rse(truth, &out.factors.product()?)?, out.iters)
        }
        SweepAlgo::Tasdii => {
            let mut icfg = cfg.tasdii.clone();
            icfg.gamma = param_value;
            icfg.looped.seed = seed_init;
            let out = tasdii(&observed, &omega, transform, &icfg)?;
            let iters = out.records.iter().map(|r| r.iters).sum();
            (rse(truth, &out.completed)?, iters)
        }
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (rse_db, exact) = rse_for_csv(raw_rse);
    Ok(RunRecord { algo, param_value, p, seed_mask, seed_init, rse_db, exact, iters, wall_ms })
}

/// Runs `n_seeds` completions per (parameter, p) cell and aggregates them.
pub fn sweep(
    algo: SweepAlgo,
    truth: &Tensor3,
    transform: &Transform,
    params: &[f64],
    p_grid: &[f64],
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    if params.is_empty() || p_grid.is_empty() {
        return Err(Error::arg("sweep", "empty parameter or p grid"));
    }
    if cfg.n_seeds == 0 {
        return Err(Error::arg("sweep", "n_seeds must be at least 1"));
    }
    for &v in params {
        algo.check_param(v)?;
    }
    for &p in p_grid {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::arg("sweep", format!("undersampling ratio {p} outside [0, 1]")));
        }
    }

    let per_param = p_grid.len() * cfg.n_seeds;
    let total = params.len() * per_param;
    let outcomes: Vec<(RunRecord, bool)> = par::map_indexed(total, |idx| {
        let param_value = params[idx / per_param];
        let p = p_grid[(idx % per_param) / cfg.n_seeds];
        let seed_mask = split_seed(cfg.base_seed, 2 * idx as u64);
        let seed_init = split_seed(cfg.base_seed, 2 * idx as u64 + 1);
        match run_cell(algo, truth, transform, param_value, p, seed_mask, seed_init, cfg) {
            Ok(row) => (row, false),
            Err(_) => (
                RunRecord {
                    algo,
                    param_value,
                    p,
                    seed_mask,
                    seed_init,
                    rse_db: 0.0,
                    exact: false,
                    iters: 0,
                    wall_ms: 0.0,
                },
                true,
            ),
        }
    });

    let runs: Vec<RunRecord> = outcomes.iter().map(|(row, _)| row.clone()).collect();
    let mut cells = aggregate(&runs);
    for (idx, (_, failed)) in outcomes.iter().enumerate() {
        if *failed {
            cells[idx / cfg.n_seeds].failed_runs += 1;
        }
    }
    Ok(SweepResult {
        algo,
        param_grid: params.to_vec(),
        p_grid: p_grid.to_vec(),
        n_seeds: cfg.n_seeds,
        base_seed: cfg.base_seed,
        runs,
        cells,
    })
}

/// Groups runs into cells (in first-appearance order) and computes the
/// per-cell mean, minimum, and population standard deviation of the error.
/// Solver failures are only distinguishable at sweep time; rows parsed
/// back from a CSV aggregate with `failed_runs = 0`.
pub fn aggregate(runs: &[RunRecord]) -> Vec<CellStat> {
    let mut order: Vec<(u64, u64)> = Vec::new();
    let mut groups: HashMap<(u64, u64), Vec<f64>> = HashMap::new();
    for r in runs {
        let key = (r.param_value.to_bits(), r.p.to_bits());
        groups.entry(key).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        groups.get_mut(&key).expect("group just inserted").push(r.rse_db);
    }
    order
        .into_iter()
        .map(|key| {
            let vals = &groups[&key];
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            CellStat {
                param_value: f64::from_bits(key.0),
                p: f64::from_bits(key.1),
                n_runs: vals.len(),
                failed_runs: 0,
                mean_rse_db: mean,
                min_rse_db: min,
                std_rse_db: var.sqrt(),
            }
        })
        .collect()
}

/// For each undersampling ratio (in first-appearance order), the cell with
/// the lowest seed-averaged error; ties keep the earlier parameter.
pub fn best_by_p(cells: &[CellStat]) -> Vec<BestCell> {
    let mut order: Vec<u64> = Vec::new();
    let mut best: HashMap<u64, (f64, f64)> = HashMap::new();
    for c in cells {
        let key = c.p.to_bits();
        match best.get(&key) {
            None => {
                order.push(key);
                best.insert(key, (c.param_value, c.mean_rse_db));
            }
            Some(&(_, cur)) if c.mean_rse_db < cur => {
                best.insert(key, (c.param_value, c.mean_rse_db));
            }
            _ => {}
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (param, err) = best[&key];
            BestCell { p: f64::from_bits(key), best_param: param, min_rse_db: err }
        })
        .collect()
}

pub const CSV_HEADER: [&str; 10] = [
    "algo",
    "param_name",
    "param_value",
    "p",
    "seed_mask",
    "seed_init",
    "rse_db",
    "exact",
    "iters",
    "wall_ms",
];

/// 17 significant digits — enough to reproduce any `f64` bit for bit.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes runs to CSV with an exactly round-tripping float format.
pub fn runs_to_csv(runs: &[RunRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("csv header to memory");
    for r in runs {
        w.write_record([
            r.algo.as_str().to_string(),
            r.algo.param_name().to_string(),
            fmt_f64(r.param_value),
            fmt_f64(r.p),
            r.seed_mask.to_string(),
            r.seed_init.to_string(),
            fmt_f64(r.rse_db),
            r.exact.to_string(),
            r.iters.to_string(),
            fmt_f64(r.wall_ms),
        ])
        .expect("csv row to memory");
    }
    let bytes = w.into_inner().expect("csv flush to memory");
    String::from_utf8(bytes).expect("csv output is ascii")
}

/// Parses a CSV produced by [`runs_to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<RunRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::BadFile(e.to_string()))?;
    if headers.iter().ne(CSV_HEADER) {
        return Err(Error::BadFile(format!("unexpected sweep CSV header {headers:?}")));
    }
    let mut runs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::BadFile(e.to_string()))?;
        let field = |i: usize| {
            rec.get(i).ok_or_else(|| Error::BadFile(format!("row with {} fields", rec.len())))
        };
        let algo = SweepAlgo::parse(field(0)?)?;
        if field(1)? != algo.param_name() {
            return Err(Error::BadFile(format!(
                "parameter column {:?} does not belong to algorithm {algo}",
                field(1)?
            )));
        }
        runs.push(RunRecord {
            algo,
            param_value: parse_num(field(2)?)?,
            p: parse_num(field(3)?)?,
            seed_mask: parse_num(field(4)?)?,
            seed_init: parse_num(field(5)?)?,
            rse_db: parse_num(field(6)?)?,
            exact: parse_num(field(7)?)?,
            iters: parse_num(field(8)?)?,
            wall_ms: parse_num(field(9)?)?,
        });
    }
    Ok(runs)
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::BadFile(format!("unparseable field {s:?}")))
}

/// Reads a run ledger back from disk.
pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    parse_csv(&std::fs::read_to_string(path)?)
}

/// Reduces a run ledger to the minimal-error curve CSV
/// (`p,best_param,min_rse_db`), one row per undersampling ratio.
pub fn report_csv(runs: &[RunRecord]) -> String {
    let mut out = String::from("p,best_param,min_rse_db\n");
    for b in best_by_p(&aggregate(runs)) {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_f64(b.p),
            fmt_f64(b.best_param),
            fmt_f64(b.min_rse_db)
        ));
    }
    out
}
