//! Command-line front end: `decompose`, `synth`, `phase`, `bench`, `project`
//! and `check`.
//!
//! Results go to stdout as JSON (one document per run); diagnostics go to
//! stderr. Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 a
//! property check failed.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{
    emit_heatmap, grid_csv, init_bound_check, projection_csv, run_phase_grid, run_projection_sweep,
    run_timing_sweep, timing_csv, CellStatus, FeatureMode, PhaseGrid, ProjectionSweep, TimingTemplate,
};
use crate::metrics::lemma_property_checks;
use crate::model::io::{read_csv, read_matrix, write_csv, write_matrix};
use crate::model::{
    DenseMatrix, FeaturePair, IncoherenceCase, KeepRule, Mu1, Problem, ProjectionMode, SolverConfig,
    DEFAULT_DYKSTRA_ITERS,
};
use crate::solver::solve;
use crate::synthgen::{generate, GenSpec, SignModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rpcaf", version, about = "Robust PCA with feature side information")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split an observation into low-rank and sparse parts.
    Decompose(DecomposeArgs),
    /// Write a seeded synthetic instance and its ground truth.
    Synth(SynthArgs),
    /// Phase-transition grid over rank and corruption fraction.
    Phase(PhaseArgs),
    /// Running-time sweep over matrix sizes.
    Bench(BenchArgs),
    /// Success counts against the number of Dykstra cycles.
    Project(ProjectArgs),
    /// Lemma property checks and the initialization-bound check.
    Check(CheckArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CaseArg {
    I,
    Ii,
    Iii,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProjectionArg {
    None,
    Dykstra,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum KeepArg {
    /// Keep entries in the top fraction of their row or their column.
    Either,
    /// Keep entries in the top fraction of both.
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SignArg {
    Bernoulli,
    Coherent,
}

impl From<SignArg> for SignModel {
    fn from(s: SignArg) -> Self {
        match s {
            SignArg::Bernoulli => SignModel::BernoulliPM1,
            SignArg::Coherent => SignModel::CoherentSign,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FeaturesArg {
    Informative,
    Identity,
}

#[derive(Clone, Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    /// Cap the step at 1/(192‖L0‖₂).
    #[arg(long)]
    pub safe_step: bool,
    #[arg(long, default_value_t = 3000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = CaseArg::Iii)]
    pub case: CaseArg,
    /// Incoherence constant for the projection budget; estimated when absent.
    #[arg(long)]
    pub mu1: Option<f64>,
    #[arg(long, value_enum, default_value_t = ProjectionArg::None)]
    pub projection: ProjectionArg,
    #[arg(long, value_enum, default_value_t = KeepArg::Either)]
    pub keep_rule: KeepArg,
}

impl SolverArgs {
    fn config(&self, dykstra_iters: usize) -> SolverConfig {
        SolverConfig {
            step_size: self.step,
            safe_step: self.safe_step,
            max_iters: self.max_iters,
            tol: self.tol,
            incoherence_case: match self.case {
                CaseArg::I => IncoherenceCase::CaseI,
                CaseArg::Ii => IncoherenceCase::CaseII,
                CaseArg::Iii => IncoherenceCase::CaseIII,
            },
            mu1: self.mu1.map_or(Mu1::Auto, Mu1::Given),
            projection: match self.projection {
                ProjectionArg::None => ProjectionMode::None,
                ProjectionArg::Dykstra => ProjectionMode::SetProjection { dykstra_iters },
            },
            keep_rule: match self.keep_rule {
                KeepArg::Either => KeepRule::ZeroIfBelowBoth,
                KeepArg::Both => KeepRule::KeepIfAboveBoth,
            },
            ..SolverConfig::default()
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct DecomposeArgs {
    #[arg(long)]
    pub m: PathBuf,
    /// Row features; the identity when absent.
    #[arg(long)]
    pub x: Option<PathBuf>,
    /// Column features; the identity when absent.
    #[arg(long)]
    pub y: Option<PathBuf>,
    #[arg(long)]
    pub out_l: Option<PathBuf>,
    #[arg(long)]
    pub out_s: Option<PathBuf>,
    #[arg(long)]
    pub rank: usize,
    /// Fraction of corrupted entries per row and column.
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_DYKSTRA_ITERS)]
    pub dykstra_iters: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Clone, Debug, Args)]
pub struct SynthArgs {
    /// Rows and columns; overridden by --n1/--n2.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub n2: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SignArg::Bernoulli)]
    pub sign: SignArg,
    /// Feature columns beyond the rank.
    #[arg(long, default_value_t = 5)]
    pub extra_basis: usize,
    /// Output directory; created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SignArg::Bernoulli)]
    pub sign: SignArg,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    /// Allowed excess of a row's corruption fraction over alpha.
    #[arg(long, default_value_t = 0.065)]
    pub row_slack: f64,
    #[arg(long, default_value_t = 5)]
    pub extra_basis: usize,
    /// Leave wall-clock columns empty so files are reproducible.
    #[arg(long)]
    pub no_timings: bool,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

impl GridArgs {
    fn base_spec(&self) -> GenSpec {
        GenSpec {
            n1: self.n,
            n2: self.n,
            sign_model: self.sign.into(),
            row_slack: self.row_slack,
            extra_basis: self.extra_basis,
            seed: self.seed,
            ..GenSpec::default()
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct PhaseArgs {
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,40")]
    pub grid_ranks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2,0.3")]
    pub grid_alphas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = FeaturesArg::Informative)]
    pub features: FeaturesArg,
    #[arg(long)]
    pub pgm: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Clone, Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,200,400")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub no_timings: bool,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Clone, Debug, Args)]
pub struct ProjectArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,1,10,100")]
    pub dykstra_iters: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "60,65,70,75")]
    pub grid_ranks: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Clone, Debug, Args)]
pub struct CheckArgs {
    /// Random trials per lemma.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Instances for the initialization-bound check.
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Reads RPF1, or CSV when the path ends in `.csv`.
fn load(path: &Path) -> Result<DenseMatrix> {
    if is_csv(path) {
        read_csv(path)
    } else {
        read_matrix(path)
    }
}

fn save(m: &DenseMatrix, path: &Path) -> Result<()> {
    if is_csv(path) {
        write_csv(m, path)
    } else {
        write_matrix(m, path)
    }
}

fn load_feature(path: Option<&Path>, n: usize) -> Result<DenseMatrix> {
    match path {
        Some(p) => load(p),
        None => Ok(DenseMatrix::identity(n)),
    }
}

#[derive(Serialize)]
struct DecomposeReport {
    rows: usize,
    cols: usize,
    rank: usize,
    alpha: f64,
    iterations: usize,
    converged: bool,
    stop_reason: crate::model::StopReason,
    final_residual: Option<f64>,
    step_size: f64,
}

fn decompose(args: &DecomposeArgs) -> Result<i32> {
    let m = load(&args.m)?;
    let (n1, n2) = m.shape();
    let x = load_feature(args.x.as_deref(), n1)?;
    let y = load_feature(args.y.as_deref(), n2)?;
    let features = if args.x.is_none() && args.y.is_none() {
        FeaturePair::identity(n1, n2)
    } else {
        FeaturePair::new(x, y)?
    };
    let problem = Problem::new(m, features, args.rank, args.alpha)?;
    let res = solve(&problem, &args.solver.config(args.dykstra_iters))?;
    if let Some(p) = &args.out_l {
        save(&res.l, p)?;
    }
    if let Some(p) = &args.out_s {
        save(&res.s, p)?;
    }
    eprintln!(
        "decompose: {} iterations, {:?}, {:.3}s",
        res.iterations_run,
        res.stop_reason,
        res.elapsed.as_secs_f64()
    );
    print_json(&DecomposeReport {
        rows: n1,
        cols: n2,
        rank: args.rank,
        alpha: args.alpha,
        iterations: res.iterations_run,
        converged: res.converged,
        stop_reason: res.stop_reason,
        final_residual: res.final_residual(),
        step_size: res.step_size,
    })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SynthReport {
    spec: GenSpec,
    files: Vec<String>,
    sigma_star: Vec<f64>,
    mu1: f64,
    corrupted_entries: usize,
}

fn synth(args: &SynthArgs) -> Result<i32> {
    let spec = GenSpec {
        n1: args.n1.unwrap_or(args.n),
        n2: args.n2.unwrap_or(args.n),
        rank: args.rank,
        alpha: args.alpha,
        sign_model: args.sign.into(),
        extra_basis: args.extra_basis,
        seed: args.seed,
        ..GenSpec::default()
    };
    let (problem, gt) = generate(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    let outputs = [
        ("m.rpf", problem.m().clone()),
        ("x.rpf", problem.features().x().clone()),
        ("y.rpf", problem.features().y().clone()),
        ("l_star.rpf", DenseMatrix::from_matrix(gt.l_star.clone())?),
        ("s_star.rpf", DenseMatrix::from_matrix(gt.s_star.clone())?),
    ];
    let mut files = Vec::new();
    for (name, mat) in &outputs {
        write_matrix(mat, args.out.join(name))?;
        files.push(name.to_string());
    }
    let spec_text = serde_json::to_string_pretty(&spec).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(args.out.join("spec.json"), spec_text + "\n")?;
    files.push("spec.json".into());
    print_json(&SynthReport {
        corrupted_entries: gt.s_star.iter().filter(|v| **v != 0.0).count(),
        mu1: gt.mu1(),
        sigma_star: gt.sigma_star.iter().copied().collect(),
        spec,
        files,
    })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CellSummary {
    r: usize,
    alpha: f64,
    status: CellStatus,
    max_rel_error: Option<f64>,
}

#[derive(Serialize)]
struct PhaseReport {
    ranks: Vec<usize>,
    alphas: Vec<f64>,
    trials_per_cell: usize,
    successes: usize,
    cells: Vec<CellSummary>,
}

fn cell_summaries(cells: &[crate::harness::CellResult]) -> Vec<CellSummary> {
    cells
        .iter()
        .map(|c| CellSummary {
            r: c.rank,
            alpha: c.alpha,
            status: c.status,
            max_rel_error: c.trials.iter().map(|t| t.rel_error).reduce(f64::max),
        })
        .collect()
}

fn phase(args: &PhaseArgs) -> Result<i32> {
    let grid = PhaseGrid {
        trials_per_cell: args.grid.trials,
        sign_model: args.grid.sign.into(),
        feature_mode: match args.features {
            FeaturesArg::Informative => FeatureMode::Informative,
            FeaturesArg::Identity => FeatureMode::Identity,
        },
        ..PhaseGrid::new(args.grid_ranks.clone(), args.grid_alphas.clone())
    };
    let grid = run_phase_grid(grid, &args.solver.config(DEFAULT_DYKSTRA_ITERS), &args.grid.base_spec())?;
    let timings = !args.grid.no_timings;
    match &args.pgm {
        Some(pgm) => emit_heatmap(&grid, pgm, args.grid.csv.as_deref(), timings)?,
        None => {
            if let Some(csv) = &args.grid.csv {
                std::fs::write(csv, grid_csv(&grid, timings))?;
            }
        }
    }
    for c in grid.results.iter().filter(|c| c.status == CellStatus::Ungeneratable) {
        eprintln!("cell r={} alpha={}: {}", c.rank, c.alpha, c.note.as_deref().unwrap_or(""));
    }
    print_json(&PhaseReport {
        ranks: grid.ranks.clone(),
        alphas: grid.alphas.clone(),
        trials_per_cell: grid.trials_per_cell,
        successes: grid.success_count(),
        cells: cell_summaries(&grid.results),
    })?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct BenchRow {
    n: usize,
    rank: usize,
    feature_dim: usize,
    trial: usize,
    iterations: usize,
    rel_error: f64,
    reached: bool,
    wall_ms: Option<f64>,
}

fn bench(args: &BenchArgs) -> Result<i32> {
    let template = TimingTemplate {
        trials: args.trials,
        seed: args.seed,
        ..TimingTemplate::default()
    };
    let rows = run_timing_sweep(&args.sizes, &template, &args.solver.config(DEFAULT_DYKSTRA_ITERS))?;
    let timings = !args.no_timings;
    if let Some(csv) = &args.csv {
        std::fs::write(csv, timing_csv(&rows, timings))?;
    }
    let out: Vec<BenchRow> = rows
        .iter()
        .map(|r| BenchRow {
            n: r.n,
            rank: r.rank,
            feature_dim: r.feature_dim,
            trial: r.trial,
            iterations: r.iterations,
            rel_error: r.rel_error,
            reached: r.reached,
            wall_ms: timings.then_some(r.wall_ms),
        })
        .collect();
    print_json(&out)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ProjectColumnSummary {
    dykstra_iters: usize,
    successes: usize,
    cells: Vec<CellSummary>,
}

fn project(args: &ProjectArgs) -> Result<i32> {
    let sweep = ProjectionSweep {
        dykstra_iters: args.dykstra_iters.clone(),
        ranks: args.grid_ranks.clone(),
        alpha: args.alpha,
        trials: args.grid.trials,
    };
    let cols = run_projection_sweep(&sweep, &args.grid.base_spec(), &args.solver.config(DEFAULT_DYKSTRA_ITERS))?;
    if let Some(csv) = &args.grid.csv {
        std::fs::write(csv, projection_csv(&cols, !args.grid.no_timings))?;
    }
    let out: Vec<ProjectColumnSummary> = cols
        .iter()
        .map(|c| ProjectColumnSummary {
            dykstra_iters: c.dykstra_iters,
            successes: c.successes,
            cells: cell_summaries(&c.cells),
        })
        .collect();
    print_json(&out)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CheckReport {
    lemmas: crate::metrics::LemmaReport,
    init_bound_instances: usize,
    init_bound_violations: usize,
    passed: bool,
}

fn check(args: &CheckArgs) -> Result<i32> {
    let lemmas = match lemma_property_checks(args.trials, args.seed) {
        Ok(report) => report,
        Err(e @ Error::LemmaViolation { .. }) => {
            eprintln!("{e}");
            print_json(&serde_json::json!({ "passed": false, "error": e.to_string() }))?;
            return Ok(EXIT_CHECK);
        }
        Err(e) => return Err(e),
    };
    let init = init_bound_check(args.instances, args.n, &[1, 2], 0.9, args.seed)?;
    for t in init.trials.iter().filter(|t| !t.holds) {
        eprintln!(
            "initialization bound violated: seed {} rank {} distance {:e} > {:e}",
            t.seed, t.rank, t.distance, t.bound
        );
    }
    let passed = init.violations == 0;
    print_json(&CheckReport {
        lemmas,
        init_bound_instances: init.trials.len(),
        init_bound_violations: init.violations,
        passed,
    })?;
    Ok(if passed { EXIT_OK } else { EXIT_CHECK })
}

/// Parses `argv` (program name first) and runs the subcommand, returning
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Decompose(a) => decompose(a),
        Command::Synth(a) => synth(a),
        Command::Phase(a) => phase(a),
        Command::Bench(a) => bench(a),
        Command::Project(a) => project(a),
        Command::Check(a) => check(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Spec(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            }
        }
    }
}
