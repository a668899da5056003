//! Experiment drivers: phase-transition grids, running-time sweeps and the
//! projection-effectiveness sweep, with CSV and PGM output.

use std::fmt::Write as _;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::relative_error;
use crate::model::{ProjectionMode, SolverConfig, StopReason};
use crate::solver::{solve, solve_with_observer};
use crate::synthgen::{generate, GenSpec, SignModel};

pub const DEFAULT_TRIALS: usize = 3;
pub const SUCCESS_TOL: f64 = 1e-3;
pub const THREADS_ENV: &str = "RPCAF_THREADS";

/// Mixes a 64-bit value (splitmix64 finalizer).
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial, a pure function of the base seed and cell coordinates.
pub fn trial_seed(base_seed: u64, rank: usize, alpha: f64, trial: usize) -> u64 {
    let alpha_key = (alpha * 1e4).round() as i64 as u64;
    let mut h = mix(base_seed);
    for v in [rank as u64, alpha_key, trial as u64] {
        h = mix(h ^ v);
    }
    h
}

/// Worker count from `RPCAF_THREADS`, or rayon's default when unset.
pub fn worker_threads() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
            if n == 0 {
                return Err(Error::Config(format!("{THREADS_ENV} must be at least 1")));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_threads()? {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    /// The generated features.
    Informative,
    /// X = I, Y = I on the same instances.
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub rel_error: f64,
    pub iterations: usize,
    pub wall_ms: f64,
    pub success: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CellStatus {
    Success,
    Failure,
    /// The generator could not produce an instance for this cell.
    Ungeneratable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellResult {
    pub rank: usize,
    pub alpha: f64,
    pub status: CellStatus,
    pub trials: Vec<TrialOutcome>,
    /// Generator message when the cell is ungeneratable.
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseGrid {
    pub ranks: Vec<usize>,
    pub alphas: Vec<f64>,
    pub trials_per_cell: usize,
    pub success_tol: f64,
    pub sign_model: SignModel,
    pub feature_mode: FeatureMode,
    /// Row-major over (rank, alpha) once run.
    pub results: Vec<CellResult>,
}

impl PhaseGrid {
    pub fn new(ranks: Vec<usize>, alphas: Vec<f64>) -> Self {
        Self {
            ranks,
            alphas,
            trials_per_cell: DEFAULT_TRIALS,
            success_tol: SUCCESS_TOL,
            sign_model: SignModel::BernoulliPM1,
            feature_mode: FeatureMode::Informative,
            results: Vec::new(),
        }
    }

    pub fn cell(&self, rank_idx: usize, alpha_idx: usize) -> Option<&CellResult> {
        self.results.get(rank_idx * self.alphas.len() + alpha_idx)
    }

    pub fn success_count(&self) -> usize {
        self.results
            .iter()
            .filter(|c| c.status == CellStatus::Success)
            .count()
    }

    fn validate(&self) -> Result<()> {
        if self.ranks.is_empty() || self.alphas.is_empty() {
            return Err(Error::Config("phase grid needs at least one rank and one alpha".into()));
        }
        if self.trials_per_cell == 0 {
            return Err(Error::Config("trials_per_cell must be positive".into()));
        }
        if !(self.success_tol > 0.0) {
            return Err(Error::Config("success_tol must be positive".into()));
        }
        Ok(())
    }
}

fn run_trial(
    spec: &GenSpec,
    config: &SolverConfig,
    mode: FeatureMode,
    trial: usize,
    tol: f64,
) -> Result<TrialOutcome> {
    let (problem, gt) = generate(spec)?;
    let problem = match mode {
        FeatureMode::Informative => problem,
        FeatureMode::Identity => problem.with_identity_features()?,
    };
    let start = Instant::now();
    let (rel_error, iterations) = match solve(&problem, config) {
        Ok(res) => (relative_error(res.l.as_matrix(), &gt.l_star)?, res.iterations_run),
        Err(Error::Divergence { iteration }) => (f64::INFINITY, iteration),
        Err(e) => return Err(e),
    };
    Ok(TrialOutcome {
        trial,
        seed: spec.seed,
        rel_error,
        iterations,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        success: rel_error < tol,
    })
}

fn run_cell(
    grid: &PhaseGrid,
    config: &SolverConfig,
    base: &GenSpec,
    rank: usize,
    alpha: f64,
) -> Result<CellResult> {
    let mut trials = Vec::with_capacity(grid.trials_per_cell);
    for t in 0..grid.trials_per_cell {
        let spec = GenSpec {
            rank,
            alpha,
            sign_model: grid.sign_model,
            seed: trial_seed(base.seed, rank, alpha, t),
            ..base.clone()
        };
        match run_trial(&spec, config, grid.feature_mode, t, grid.success_tol) {
            Ok(outcome) => trials.push(outcome),
            Err(e @ (Error::Generation(_) | Error::Spec(_))) => {
                return Ok(CellResult {
                    rank,
                    alpha,
                    status: CellStatus::Ungeneratable,
                    trials: Vec::new(),
                    note: Some(e.to_string()),
                })
            }
            Err(e) => return Err(e),
        }
    }
    let status = if trials.iter().all(|t| t.success) {
        CellStatus::Success
    } else {
        CellStatus::Failure
    };
    Ok(CellResult {
        rank,
        alpha,
        status,
        trials,
        note: None,
    })
}

/// Solves every cell of the grid. `base_spec` supplies everything but rank,
/// alpha, sign model and seed; its `seed` is the base seed.
pub fn run_phase_grid(grid: PhaseGrid, config: &SolverConfig, base_spec: &GenSpec) -> Result<PhaseGrid> {
    grid.validate()?;
    config.validate()?;
    let coords: Vec<(usize, f64)> = grid
        .ranks
        .iter()
        .flat_map(|&r| grid.alphas.iter().map(move |&a| (r, a)))
        .collect();
    let results = pool()?.install(|| {
        coords
            .par_iter()
            .map(|&(r, a)| run_cell(&grid, config, base_spec, r, a))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(PhaseGrid { results, ..grid })
}

fn fmt_wall(ms: f64, timings: bool) -> String {
    if timings {
        format!("{ms:.3}")
    } else {
        String::new()
    }
}

/// Per-trial CSV: `r,alpha,trial,rel_error,iterations,wall_ms,success`.
/// Ungeneratable cells contribute no rows. With `timings` off the wall
/// clock column is left empty so output is reproducible byte for byte.
pub fn grid_csv(grid: &PhaseGrid, timings: bool) -> String {
    let mut out = String::from("r,alpha,trial,rel_error,iterations,wall_ms,success\n");
    for cell in &grid.results {
        for t in &cell.trials {
            let _ = writeln!(
                out,
                "{},{},{},{:e},{},{},{}",
                cell.rank,
                cell.alpha,
                t.trial,
                t.rel_error,
                t.iterations,
                fmt_wall(t.wall_ms, timings),
                t.success as u8
            );
        }
    }
    out
}

/// P5 graymap: one pixel per cell, ranks down the rows (first rank at the
/// top), alphas across the columns. 255 marks success, 0 anything else.
pub fn heatmap_pgm(grid: &PhaseGrid) -> Result<Vec<u8>> {
    let expected = grid.ranks.len() * grid.alphas.len();
    if grid.results.len() != expected {
        return Err(Error::Config(format!(
            "grid holds {} cells, expected {expected}",
            grid.results.len()
        )));
    }
    let mut out = format!("P5 {} {} 255\n", grid.alphas.len(), grid.ranks.len()).into_bytes();
    out.extend(grid.results.iter().map(|c| {
        if c.status == CellStatus::Success {
            255u8
        } else {
            0u8
        }
    }));
    Ok(out)
}

/// Writes the heatmap to `pgm_path` and, when given, the per-trial CSV.
pub fn emit_heatmap(grid: &PhaseGrid, pgm_path: &Path, csv_path: Option<&Path>, timings: bool) -> Result<()> {
    let bytes = heatmap_pgm(grid)?;
    std::fs::File::create(pgm_path)?.write_all(&bytes)?;
    if let Some(p) = csv_path {
        std::fs::write(p, grid_csv(grid, timings))?;
    }
    Ok(())
}

/// Template for the running-time sweep. Rank and feature dimension are
/// fractions of `n`; feature dimension is clamped to `[rank, n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingTemplate {
    pub rank_fraction: f64,
    pub alpha: f64,
    pub feature_fraction: f64,
    pub trials: usize,
    /// Relative error at which the clock stops.
    pub target_error: f64,
    pub seed: u64,
}

impl Default for TimingTemplate {
    fn default() -> Self {
        Self {
            rank_fraction: 0.2,
            alpha: 0.11,
            feature_fraction: 0.5,
            trials: 3,
            target_error: 1e-2,
            seed: 0,
        }
    }
}

impl TimingTemplate {
    pub fn spec_for(&self, n: usize, trial: usize) -> GenSpec {
        let rank = ((self.rank_fraction * n as f64).round() as usize).max(1);
        let dim = ((self.feature_fraction * n as f64).round() as usize).clamp(rank, n);
        GenSpec {
            n1: n,
            n2: n,
            rank,
            alpha: self.alpha,
            extra_basis: dim - rank,
            seed: trial_seed(self.seed, n, self.alpha, trial),
            ..GenSpec::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub n: usize,
    pub rank: usize,
    pub feature_dim: usize,
    pub trial: usize,
    pub wall_ms: f64,
    pub iterations: usize,
    pub rel_error: f64,
    pub reached: bool,
}

/// `‖X P Qᵀ Yᵀ − L*‖_F / ‖L*‖_F` for orthonormal X, Y without forming the
/// product: uses `H = Xᵀ L* Y`.
struct CheapError {
    h: DMatrix<f64>,
    l_star_sq: f64,
}

impl CheapError {
    fn new(problem: &crate::model::Problem, l_star: &DMatrix<f64>) -> Self {
        let h = problem.reduce_y(&problem.reduce_x(l_star).transpose()).transpose();
        Self {
            h,
            l_star_sq: l_star.norm_squared(),
        }
    }

    fn eval(&self, p: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
        let pp = p.transpose() * p;
        let qq = q.transpose() * q;
        let lsq = pp.component_mul(&qq).sum();
        let cross = (p.transpose() * &self.h).component_mul(&q.transpose()).sum();
        ((lsq - 2.0 * cross + self.l_star_sq).max(0.0) / self.l_star_sq).sqrt()
    }
}

/// For each size, solves `trials` instances until the relative error to L*
/// drops to the template target. Instances run serially. Runs that hit
/// `max_iters` or diverge are recorded with `reached = false`.
pub fn run_timing_sweep(sizes: &[usize], template: &TimingTemplate, config: &SolverConfig) -> Result<Vec<TimingRow>> {
    if sizes.is_empty() {
        return Err(Error::Config("timing sweep needs at least one size".into()));
    }
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("sizes must be strictly ascending".into()));
    }
    if template.trials == 0 {
        return Err(Error::Config("timing sweep needs at least one trial".into()));
    }
    config.validate()?;
    let mut rows = Vec::new();
    for &n in sizes {
        for trial in 0..template.trials {
            let spec = template.spec_for(n, trial);
            let (problem, gt) = generate(&spec)?;
            let cheap = CheapError::new(&problem, &gt.l_star);
            let mut last = f64::INFINITY;
            let start = Instant::now();
            let outcome = solve_with_observer(&problem, config, |st| {
                last = cheap.eval(&st.factors.p, &st.factors.q);
                if last <= template.target_error {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            let (iterations, rel_error, reached) = match outcome {
                Ok(res) => {
                    let rel = relative_error(res.l.as_matrix(), &gt.l_star)?;
                    let reached = res.stop_reason == StopReason::Observer || rel <= template.target_error;
                    (res.iterations_run, rel, reached)
                }
                Err(Error::Divergence { iteration }) => (iteration, last, false),
                Err(e) => return Err(e),
            };
            rows.push(TimingRow {
                n,
                rank: spec.rank,
                feature_dim: spec.rank + spec.extra_basis,
                trial,
                wall_ms,
                iterations,
                rel_error,
                reached,
            });
        }
    }
    Ok(rows)
}

pub fn timing_csv(rows: &[TimingRow], timings: bool) -> String {
    let mut out = String::from("n,rank,feature_dim,trial,wall_ms,iterations,rel_error,status\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{:e},{}",
            r.n,
            r.rank,
            r.feature_dim,
            r.trial,
            fmt_wall(r.wall_ms, timings),
            r.iterations,
            r.rel_error,
            if r.reached { "reached" } else { "timeout" }
        );
    }
    out
}

/// Median wall time of one solver iteration, in milliseconds, over
/// `repeats` runs of exactly `iters` iterations on `problem`.
pub fn per_iteration_ms(
    problem: &crate::model::Problem,
    config: &SolverConfig,
    iters: usize,
    repeats: usize,
) -> Result<f64> {
    if iters == 0 || repeats == 0 {
        return Err(Error::Config("iters and repeats must be positive".into()));
    }
    let cfg = SolverConfig {
        max_iters: iters,
        tol: f64::MIN_POSITIVE,
        ..config.clone()
    };
    let mut samples = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let res = solve(problem, &cfg)?;
        samples.push(res.iter_elapsed.as_secs_f64() * 1e3 / res.iterations_run.max(1) as f64);
    }
    samples.sort_by(f64::total_cmp);
    Ok(samples[samples.len() / 2])
}

/// Setup of the projection-effectiveness sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSweep {
    pub dykstra_iters: Vec<usize>,
    pub ranks: Vec<usize>,
    pub alpha: f64,
    pub trials: usize,
}

impl Default for ProjectionSweep {
    fn default() -> Self {
        Self {
            dykstra_iters: vec![0, 1, 10, 100],
            ranks: vec![60, 65, 70, 75],
            alpha: 0.1,
            trials: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectionColumn {
    pub dykstra_iters: usize,
    pub successes: usize,
    pub cells: Vec<CellResult>,
}

/// Runs the same phase cells once per Dykstra iteration count, with the
/// projection switched on for every count (0 included). Only the projection
/// differs between columns.
pub fn run_projection_sweep(
    sweep: &ProjectionSweep,
    base_spec: &GenSpec,
    config: &SolverConfig,
) -> Result<Vec<ProjectionColumn>> {
    if !sweep.dykstra_iters.contains(&0) {
        return Err(Error::Config("dykstra_iters must include 0".into()));
    }
    let mut columns = Vec::with_capacity(sweep.dykstra_iters.len());
    for &k in &sweep.dykstra_iters {
        let cfg = SolverConfig {
            projection: ProjectionMode::SetProjection { dykstra_iters: k },
            ..config.clone()
        };
        let grid = PhaseGrid {
            trials_per_cell: sweep.trials,
            ..PhaseGrid::new(sweep.ranks.clone(), vec![sweep.alpha])
        };
        let grid = run_phase_grid(grid, &cfg, base_spec)?;
        columns.push(ProjectionColumn {
            dykstra_iters: k,
            successes: grid.success_count(),
            cells: grid.results,
        });
    }
    Ok(columns)
}

/// CSV: `dykstra_iters,r,alpha,trial,rel_error,iterations,wall_ms,success`.
pub fn projection_csv(columns: &[ProjectionColumn], timings: bool) -> String {
    let mut out = String::from("dykstra_iters,r,alpha,trial,rel_error,iterations,wall_ms,success\n");
    for col in columns {
        for cell in &col.cells {
            for t in &cell.trials {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:e},{},{},{}",
                    col.dykstra_iters,
                    cell.rank,
                    cell.alpha,
                    t.trial,
                    t.rel_error,
                    t.iterations,
                    fmt_wall(t.wall_ms, timings),
                    t.success as u8
                );
            }
        }
    }
    out
}

/// One instance of the initialization-bound check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitBoundTrial {
    pub seed: u64,
    pub rank: usize,
    pub alpha: f64,
    pub alpha_init_bound: f64,
    pub distance: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InitBoundReport {
    pub trials: Vec<InitBoundTrial>,
    pub violations: usize,
}

/// Checks `d(P0, Q0, P*, Q*) ≤ 18αrμ1√(rκσ1*)` (case iii) on `instances`
/// instances of size `n`, cycling through `ranks`.
///
/// The constants come from the clean instance with the same seed, which
/// shares L* with the corrupted one; α is `fraction` of the resulting
/// `alpha_init_bound`.
pub fn init_bound_check(
    instances: usize,
    n: usize,
    ranks: &[usize],
    fraction: f64,
    seed: u64,
) -> Result<InitBoundReport> {
    if ranks.is_empty() || !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config("need ranks and a fraction in (0, 1)".into()));
    }
    let case = crate::model::IncoherenceCase::CaseIII;
    let mut trials = Vec::with_capacity(instances);
    for i in 0..instances {
        let rank = ranks[i % ranks.len()];
        let clean_spec = GenSpec {
            n1: n,
            n2: n,
            rank,
            alpha: 0.0,
            seed: trial_seed(seed, rank, 0.0, i),
            ..GenSpec::default()
        };
        let (clean, gt0) = generate(&clean_spec)?;
        let a_bound = crate::metrics::theory_bounds(&gt0, clean.features(), case).alpha_init_bound;
        let alpha = fraction * a_bound;
        let (problem, gt) = generate(&GenSpec { alpha, ..clean_spec })?;
        debug_assert_eq!(gt.l_star, gt0.l_star);
        let bounds = crate::metrics::theory_bounds(&gt, problem.features(), case);
        let init = crate::solver::initialize(&problem, crate::model::KeepRule::ZeroIfBelowBoth)?;
        let distance = crate::metrics::factor_distance(&init.factors, &gt.factors_star)?;
        let bound = bounds.init_distance_bound_at(alpha);
        trials.push(InitBoundTrial {
            seed: clean_spec.seed,
            rank,
            alpha,
            alpha_init_bound: a_bound,
            distance,
            bound,
            holds: distance <= bound,
        });
    }
    let violations = trials.iter().filter(|t| !t.holds).count();
    Ok(InitBoundReport { trials, violations })
}
