//! Command-line front end for the completion library.
//!
//! Tensors, matrices, and masks travel as TNS1 files; every CSV the tool
//! emits is plain comma-separated text with a header row. Slice indices in
//! output and in `--skip-slices` are 1-based.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use starcomplete_core::asd::{
    asd_random_init, default_r_max, looped_asd, AsdConfig, LoopedConfig, RankRule, TraceRow,
};
use starcomplete_core::metrics::rse_for_csv;
use starcomplete_core::sampling::SamplingPattern;
use starcomplete_core::sweep::{self, SweepAlgo, SweepConfig};
use starcomplete_core::synth::{make_phantom, PhantomSpec};
use starcomplete_core::tasd::{tasd_random_init, tasdii, SliceCompletionRecord, TasdiiConfig};
use starcomplete_core::tns1;
use starcomplete_core::transform::Transform;
use starcomplete_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "starcomplete",
    version,
    about = "Low-rank matrix and tensor completion under mode-3 transforms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic low-rank phantom stack and write it as TNS1
    Synth(SynthArgs),
    /// Draw a sampling mask and write it as a 0/1 TNS1 tensor
    Sample(SampleArgs),
    /// Complete a matrix from its observed entries
    CompleteMatrix(CompleteMatrixArgs),
    /// Complete a third-order tensor from its observed entries
    CompleteTensor(CompleteTensorArgs),
    /// Run a seeded (parameter, undersampling) grid and write the run ledger
    Sweep(SweepArgs),
    /// Reduce a run ledger to the minimal-error curve per undersampling ratio
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Energy channels (first mode)
    #[arg(long)]
    energies: usize,
    /// Image rows (second mode)
    #[arg(long)]
    rows: usize,
    /// Image columns (third mode)
    #[arg(long)]
    cols: usize,
    /// Material signatures; equals the rank of the flattened stack
    #[arg(long)]
    materials: usize,
    /// Relative white-noise level added to the clean stack
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output TNS1 path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    Bernoulli,
    Raster,
    RobustRaster,
}

#[derive(Args)]
struct SampleArgs {
    /// Mask extents, first mode
    #[arg(long)]
    n1: usize,
    /// Mask extents, second mode
    #[arg(long)]
    n2: usize,
    /// Mask extents, third mode
    #[arg(long)]
    n3: usize,
    /// Sampling model
    #[arg(long, value_enum)]
    pattern: PatternArg,
    /// Undersampling ratio in [0, 1]
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output TNS1 path (real 0/1 entries)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixAlgoArg {
    /// Alternating steepest descent at a fixed rank
    Asd,
    /// Rank-estimating completion loop with a final polish run
    Looped,
}

#[derive(Args)]
struct CompleteMatrixArgs {
    /// Observed data, a 2-D TNS1; entries off the mask are ignored
    #[arg(long = "in")]
    input: PathBuf,
    /// 0/1 mask, a 2-D TNS1 with the same extents
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, value_enum)]
    algo: MatrixAlgoArg,
    /// Completion rank: a positive integer, or `auto` to estimate it
    #[arg(long)]
    rank: String,
    /// Output TNS1 path for the completed matrix
    #[arg(long)]
    out: PathBuf,
    /// CSV of per-iteration rows: iter, relative_residual, eta_x, eta_y
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Pick validation folds uniformly at random instead of cycling a deck
    #[arg(long)]
    strict_paper: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration budget per descent run
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    /// Relative-residual tolerance for convergence
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum TensorAlgoArg {
    /// Tensor alternating steepest descent at a fixed t-rank
    Tasd,
    /// Slicewise completion with energy thresholding
    Tasdii,
}

#[derive(Args)]
struct CompleteTensorArgs {
    /// Observed data, a 3-D TNS1; entries off the mask are ignored
    #[arg(long = "in")]
    input: PathBuf,
    /// 0/1 mask, a 3-D TNS1 with the same extents
    #[arg(long)]
    mask: PathBuf,
    #[arg(long, value_enum)]
    algo: TensorAlgoArg,
    /// Factor t-rank (tasd only)
    #[arg(long)]
    t: Option<usize>,
    /// Retained-energy threshold in (0, 1] (tasdii only)
    #[arg(long)]
    gamma: Option<f64>,
    /// Mode-3 transform: dft, dct, identity, or matrix:<path to 2-D TNS1>
    #[arg(long, default_value = "dft")]
    transform: String,
    /// Output TNS1 path for the completed tensor
    #[arg(long)]
    out: PathBuf,
    /// CSV of per-slice rows: k, rho_initial, rho_reduced, status,
    /// slice_rse_db, iters (tasdii only)
    #[arg(long)]
    records: Option<PathBuf>,
    /// Complete every slice even where mirrored conjugate pairs would do
    #[arg(long)]
    no_symmetry: bool,
    /// 1-based transform-domain slices to zero instead of completing
    #[arg(long, value_delimiter = ',')]
    skip_slices: Vec<usize>,
    /// Cap the slice work pool (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration budget per descent run
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    /// Relative-residual tolerance for convergence
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepAlgoArg {
    Asd,
    LoopedAsd,
    Tasd,
    Tasdii,
}

impl From<SweepAlgoArg> for SweepAlgo {
    fn from(a: SweepAlgoArg) -> SweepAlgo {
        match a {
            SweepAlgoArg::Asd => SweepAlgo::Asd,
            SweepAlgoArg::LoopedAsd => SweepAlgo::LoopedAsd,
            SweepAlgoArg::Tasd => SweepAlgo::Tasd,
            SweepAlgoArg::Tasdii => SweepAlgo::Tasdii,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Ground-truth tensor (TNS1) that masks and scores are drawn against
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum)]
    algo: SweepAlgoArg,
    /// Parameter grid, comma separated; defaults to the standard grid
    #[arg(long, value_delimiter = ',')]
    params: Vec<f64>,
    /// Undersampling grid, comma separated; defaults to 0.05..0.5
    #[arg(long, value_delimiter = ',')]
    p_grid: Vec<f64>,
    /// Completions per cell
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Mode-3 transform: dft, dct, identity, or matrix:<path to 2-D TNS1>
    #[arg(long, default_value = "dft")]
    transform: String,
    /// Output CSV path for the run ledger
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Run ledger CSV produced by `sweep`
    #[arg(long = "in")]
    input: PathBuf,
    /// Output CSV path; prints to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Sample(args) => run_sample(args),
        Command::CompleteMatrix(args) => run_complete_matrix(args),
        Command::CompleteTensor(args) => run_complete_tensor(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Report(args) => run_report(args),
    }
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let spec = PhantomSpec::new(args.energies, args.rows, args.cols, args.materials, args.seed)
        .with_noise(args.noise);
    let phantom = make_phantom(&spec)?;
    tns1::write_tensor(&args.out, &phantom)?;
    println!(
        "wrote {}: {}x{}x{} phantom, {} materials, noise {}",
        args.out.display(),
        args.energies,
        args.rows,
        args.cols,
        args.materials,
        args.noise
    );
    Ok(())
}

fn run_sample(args: SampleArgs) -> Result<()> {
    let pattern = match args.pattern {
        PatternArg::Bernoulli => {
            SamplingPattern::bernoulli_tensor(args.n1, args.n2, args.n3, args.p, args.seed)?
        }
        PatternArg::Raster => {
            SamplingPattern::raster(args.n1, args.n2, args.n3, args.p, args.seed)?
        }
        PatternArg::RobustRaster => {
            SamplingPattern::robust_raster(args.n1, args.n2, args.n3, args.p, args.seed)?
        }
    };
    tns1::write_tensor(&args.out, &pattern.to_tensor()?)?;
    println!(
        "wrote {}: {} of {} entries observed (ratio {:.4})",
        args.out.display(),
        pattern.count(),
        pattern.mask().len(),
        pattern.realized_ratio()
    );
    Ok(())
}

fn run_complete_matrix(args: CompleteMatrixArgs) -> Result<()> {
    let d = tns1::read_matrix(&args.input)?;
    let mask = tns1::read_matrix(&args.mask)?;
    let omega = SamplingPattern::from_mask_matrix(&mask);
    let observed = omega.project_matrix(&d)?;
    let stopping = AsdConfig {
        max_iters: args.max_iters,
        tol_residual: args.tol,
        seed: args.seed,
        ..AsdConfig::default()
    };

    let (z, trace) = match args.algo {
        MatrixAlgoArg::Asd => {
            let r = match parse_rank(&args.rank)? {
                Some(r) => r,
                None => {
                    return Err(Error::InvalidArgument {
                        op: "complete-matrix",
                        details: "the fixed-rank solver needs an integer --rank; \
                                  use --algo looped for rank estimation"
                            .into(),
                    })
                }
            };
            let out = asd_random_init(&observed, &omega, r, &stopping)?;
            println!(
                "{} after {} iterations at rank {r}, relative residual {:.3e}",
                out.stop, out.iters, out.relative_residual
            );
            (out.factors.product(), out.trace)
        }
        MatrixAlgoArg::Looped => {
            let mut cfg = LoopedConfig::auto(default_r_max(d.rows(), d.cols()), args.seed);
            if let Some(r) = parse_rank(&args.rank)? {
                cfg.rank = RankRule::Fixed { r };
            }
            cfg.inner = stopping.clone();
            cfg.final_run = stopping;
            cfg.strict_paper = args.strict_paper;
            let out = looped_asd(&observed, &omega, &cfg)?;
            if out.no_knee {
                eprintln!("warning: no knee in the validation curve; kept the widest rank");
            }
            println!(
                "estimated rank {}; {} after {} iterations, relative residual {:.3e}",
                out.rank, out.stop, out.iters, out.relative_residual
            );
            (out.factors.product(), out.trace)
        }
    };

    tns1::write_matrix(&args.out, &z)?;
    if let Some(path) = &args.trace {
        write_trace(path, &trace)?;
    }
    Ok(())
}

fn run_complete_tensor(args: CompleteTensorArgs) -> Result<()> {
    let d = tns1::read_tensor(&args.input)?;
    let mask = tns1::read_tensor(&args.mask)?;
    let omega = SamplingPattern::from_mask_tensor(&mask);
    let observed = omega.project_tensor(&d)?;
    let transform = parse_transform(&args.transform, d.dims().2)?;
    let stopping = AsdConfig {
        max_iters: args.max_iters,
        tol_residual: args.tol,
        seed: args.seed,
        ..AsdConfig::default()
    };

    match args.algo {
        TensorAlgoArg::Tasd => {
            let t = args.t.ok_or(Error::InvalidArgument {
                op: "complete-tensor",
                details: "--t is required for the fixed-t-rank solver".into(),
            })?;
            for (set, flag) in [
                (args.gamma.is_some(), "--gamma"),
                (args.records.is_some(), "--records"),
                (args.no_symmetry, "--no-symmetry"),
                (!args.skip_slices.is_empty(), "--skip-slices"),
                (args.threads.is_some(), "--threads"),
            ] {
                if set {
                    return Err(Error::InvalidArgument {
                        op: "complete-tensor",
                        details: format!("{flag} applies only to the slicewise solver"),
                    });
                }
            }
            let out = tasd_random_init(&observed, &omega, t, &transform, &stopping)?;
            println!(
                "{} after {} iterations at t-rank {t}, relative residual {:.3e}",
                out.stop, out.iters, out.relative_residual
            );
            tns1::write_tensor(&args.out, &out.factors.product()?)?;
        }
        TensorAlgoArg::Tasdii => {
            let gamma = args.gamma.ok_or(Error::InvalidArgument {
                op: "complete-tensor",
                details: "--gamma is required for the slicewise solver".into(),
            })?;
            if args.t.is_some() {
                return Err(Error::InvalidArgument {
                    op: "complete-tensor",
                    details: "--t applies only to the fixed-t-rank solver".into(),
                });
            }
            let mut cfg = TasdiiConfig::new(gamma, args.seed);
            cfg.looped.inner = stopping.clone();
            cfg.looped.final_run = stopping;
            cfg.use_conjugate_symmetry = !args.no_symmetry;
            cfg.skip_slices = args.skip_slices.clone();
            cfg.threads = args.threads;
            let out = tasdii(&observed, &omega, &transform, &cfg)?;
            if out.all_zeroed() {
                eprintln!("warning: every slice was zeroed; the output tensor is zero");
            }
            println!(
                "completed {} slices: implicit rank {}, t-rank {}",
                out.records.len(),
                out.profile.implicit,
                out.profile.t_rank
            );
            tns1::write_tensor(&args.out, &out.completed)?;
            if let Some(path) = &args.records {
                write_records(path, &out.records)?;
            }
        }
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let truth = tns1::read_tensor(&args.truth)?;
    let transform = parse_transform(&args.transform, truth.dims().2)?;
    let algo = SweepAlgo::from(args.algo);
    let params =
        if args.params.is_empty() { sweep::default_param_grid(algo) } else { args.params };
    let p_grid = if args.p_grid.is_empty() { sweep::default_p_grid() } else { args.p_grid };
    let cfg = SweepConfig::new(args.seeds, args.base_seed);

    let result = sweep::sweep(algo, &truth, &transform, &params, &p_grid, &cfg)?;
    result.write_csv(&args.out)?;
    println!(
        "wrote {}: {} runs over {} cells",
        args.out.display(),
        result.runs.len(),
        result.cells.len()
    );
    for best in result.best_by_p() {
        println!(
            "p {:.3}: best {} = {}, mean RSE {:.2} dB",
            best.p,
            algo.param_name(),
            best.best_param,
            best.min_rse_db
        );
    }
    Ok(())
}

fn run_report(args: ReportArgs) -> Result<()> {
    let runs = sweep::read_csv(&args.input)?;
    let text = sweep::report_csv(&runs);
    match &args.out {
        Some(path) => {
            std::fs::write(path, text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Parses `--rank`: a positive integer gives a fixed rank, `auto` gives
/// `None` so the caller can fall back to rank estimation.
fn parse_rank(s: &str) -> Result<Option<usize>> {
    if s == "auto" {
        return Ok(None);
    }
    match s.parse::<usize>() {
        Ok(r) if r >= 1 => Ok(Some(r)),
        _ => Err(Error::InvalidArgument {
            op: "complete-matrix",
            details: format!("--rank takes a positive integer or `auto`, got {s:?}"),
        }),
    }
}

fn parse_transform(s: &str, n3: usize) -> Result<Transform> {
    match s {
        "dft" => Ok(Transform::dft(n3)),
        "dct" => Ok(Transform::dct(n3)),
        "identity" => Ok(Transform::identity(n3)),
        other => match other.strip_prefix("matrix:") {
            Some(path) => Transform::from_matrix(tns1::read_matrix(path)?),
            None => Err(Error::InvalidArgument {
                op: "transform",
                details: format!("expected dft, dct, identity, or matrix:<path>, got {other:?}"),
            }),
        },
    }
}

fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut text = String::from("iter,relative_residual,eta_x,eta_y\n");
    for row in trace {
        text.push_str(&format!(
            "{},{},{},{}\n",
            row.iter, row.relative_residual, row.eta_x, row.eta_y
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_records(path: &Path, records: &[SliceCompletionRecord]) -> Result<()> {
    let mut text = String::from("k,rho_initial,rho_reduced,status,slice_rse_db,iters\n");
    for rec in records {
        // exact fits report -inf; floor them to keep the column numeric
        let (rse_db, _) = rse_for_csv(rec.slice_rse_db);
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            rec.k, rec.rho_initial, rec.rho_reduced, rec.status, rse_db, rec.iters
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}
