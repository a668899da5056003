//! Hard-thresholding initialization followed by projected factored gradient
//! descent.

use std::ops::ControlFlow;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{
    max_row_norm, DenseMatrix, FactorPair, IncoherenceCase, KeepRule, Mu1, Problem,
    ProjectionMode, RecoveryResult, SolverConfig, StopReason, ThresholdRule,
};
use crate::projection::{project_factor, RowNormBudget};
use crate::threshold::{threshold, threshold_into, threshold_value, ThresholdSpec, ThresholdWorkspace};

/// Weight of the balance term `‖PᵀP − QᵀQ‖²_F` in the loss.
pub const BALANCE_WEIGHT: f64 = 1.0 / 64.0;
/// Relative floor applied to initial singular values before the square root.
pub const SINGULAR_FLOOR: f64 = 1e-12;

/// Top-`r` singular triple, singular values in descending order.
#[derive(Clone, Debug)]
pub struct SvdTriple {
    pub u: DMatrix<f64>,
    pub sigma: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl SvdTriple {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.sigma) * self.v.transpose()
    }
}

/// Rank-`r` truncated SVD.
///
/// Signs are fixed so that the largest-magnitude entry of every left
/// singular vector is positive (first such entry on ties).
pub fn truncated_svd(a: &DMatrix<f64>, r: usize) -> Result<SvdTriple> {
    let (rows, cols) = a.shape();
    if r == 0 || r > rows.min(cols) {
        return Err(Error::Rank(format!(
            "truncation rank {r} out of range for a {rows}x{cols} matrix"
        )));
    }
    let (u_thin, s, v_thin) = crate::linalg::thin_svd(a)?;
    let mut u = u_thin.columns(0, r).into_owned();
    let mut v = v_thin.columns(0, r).into_owned();
    let sigma = DVector::from_fn(r, |k, _| s[k].max(0.0));
    for k in 0..r {
        let lead = u
            .column(k)
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if lead < 0.0 {
            u.column_mut(k).neg_mut();
            v.column_mut(k).neg_mut();
        }
    }
    Ok(SvdTriple { u, sigma, v })
}

/// State produced by the initialization phase.
#[derive(Clone, Debug)]
pub struct Initialization {
    pub factors: FactorPair,
    pub s: DMatrix<f64>,
    pub svd: SvdTriple,
}

/// `S0 = T_α(M)`, `U0 Σ0 V0ᵀ = r-SVD(M − S0)`, `P0 = Xᵀ U0 Σ0^{1/2}`,
/// `Q0 = Yᵀ V0 Σ0^{1/2}`.
pub fn initialize(problem: &Problem, keep_rule: KeepRule) -> Result<Initialization> {
    let m = problem.m().as_matrix();
    let s0 = threshold(m, ThresholdSpec::new(problem.alpha(), keep_rule));
    let l0 = m - &s0;
    let svd = truncated_svd(&l0, problem.rank())?;
    let floor = SINGULAR_FLOOR * svd.sigma.max();
    let root = svd.sigma.map(|s| s.max(floor).sqrt());
    let root = DMatrix::from_diagonal(&root);
    let p = problem.reduce_x(&(&svd.u * &root));
    let q = problem.reduce_y(&(&svd.v * &root));
    Ok(Initialization {
        factors: FactorPair::new(p, q)?,
        s: s0,
        svd,
    })
}

/// `½‖X P Qᵀ Yᵀ + S − M‖²_F + (1/64)‖PᵀP − QᵀQ‖²_F`
pub fn loss(factors: &FactorPair, s: &DMatrix<f64>, problem: &Problem) -> f64 {
    let delta = low_rank(factors, problem) + s - problem.m().as_matrix();
    let gap = balance_gap(factors);
    0.5 * delta.norm_squared() + BALANCE_WEIGHT * gap.norm_squared()
}

/// `X P Qᵀ Yᵀ`
pub fn low_rank(factors: &FactorPair, problem: &Problem) -> DMatrix<f64> {
    problem.lift_x(&factors.p) * problem.lift_y(&factors.q).transpose()
}

/// `PᵀP − QᵀQ`
pub fn balance_gap(factors: &FactorPair) -> DMatrix<f64> {
    factors.p.transpose() * &factors.p - factors.q.transpose() * &factors.q
}

/// Gradients of [`loss`] with respect to `P` and `Q`.
pub fn gradients(
    factors: &FactorPair,
    s: &DMatrix<f64>,
    problem: &Problem,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let xp = problem.lift_x(&factors.p);
    let yq = problem.lift_y(&factors.q);
    let delta = &xp * yq.transpose() + s - problem.m().as_matrix();
    gradients_from_residual(factors, &delta, &xp, &yq, problem)
}

/// Gradients given `Δ = X P Qᵀ Yᵀ + S − M`, `XP` and `YQ`.
///
/// Products are ordered `Xᵀ(Δ(YQ))` and `Yᵀ(Δᵀ(XP))`, so the dominant cost
/// is `O(r·n1·n2)` and nothing of size d×n or n×n beyond Δ is formed.
fn gradients_from_residual(
    factors: &FactorPair,
    delta: &DMatrix<f64>,
    xp: &DMatrix<f64>,
    yq: &DMatrix<f64>,
    problem: &Problem,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let gap = balance_gap(factors);
    let balance = 4.0 * BALANCE_WEIGHT;
    let grad_p = problem.reduce_x(&(delta * yq)) + &factors.p * &gap * balance;
    let grad_q = problem.reduce_y(&(xp.transpose() * delta).transpose()) - &factors.q * &gap * balance;
    (grad_p, grad_q)
}

/// Snapshot handed to a solve observer.
#[derive(Debug)]
pub struct IterationState<'a> {
    /// 0 for the projected initial factors, `t` after the `t`-th update.
    pub iteration: usize,
    pub factors: &'a FactorPair,
    pub s: &'a DMatrix<f64>,
    /// Residual of the `(L, S)` pair that produced this update; `None` at 0.
    pub residual: Option<f64>,
}

pub fn solve(problem: &Problem, config: &SolverConfig) -> Result<RecoveryResult> {
    solve_with_observer(problem, config, |_| ControlFlow::Continue(()))
}

/// μ̂1 from the initial singular vectors.
pub fn estimate_mu1(svd: &SvdTriple) -> f64 {
    let r = svd.u.ncols() as f64;
    let mu_u = svd.u.nrows() as f64 * max_row_norm(&svd.u).powi(2) / r;
    let mu_v = svd.v.nrows() as f64 * max_row_norm(&svd.v).powi(2) / r;
    mu_u.max(mu_v)
}

fn constraint_sets(
    problem: &Problem,
    config: &SolverConfig,
    init: &Initialization,
) -> Result<(Option<RowNormBudget>, Option<RowNormBudget>)> {
    let uses_sets = matches!(config.projection, ProjectionMode::SetProjection { .. })
        && config.incoherence_case != IncoherenceCase::CaseII;
    if !uses_sets {
        return Ok((None, None));
    }
    let mu1 = match config.mu1 {
        Mu1::Given(mu) => mu,
        Mu1::Auto => estimate_mu1(&init.svd),
    };
    let (n1, n2) = problem.shape();
    let r = problem.rank();
    let cap_p = RowNormBudget::incoherence_cap(mu1, r, n1, spectral(&init.factors.p));
    let cap_q = RowNormBudget::incoherence_cap(mu1, r, n2, spectral(&init.factors.q));
    let make = |feature: &DMatrix<f64>, cap: f64| -> Result<Option<RowNormBudget>> {
        if cap > 0.0 && cap.is_finite() {
            RowNormBudget::uniform(feature.clone(), cap).map(Some)
        } else {
            Ok(None)
        }
    };
    Ok((make(problem.x(), cap_p)?, make(problem.y(), cap_q)?))
}

fn spectral(m: &DMatrix<f64>) -> f64 {
    crate::model::spectral_norm(m)
}

/// Runs the full solver, calling `observer` after initialization and after
/// every factor update. Returning `Break` stops the run after that update.
pub fn solve_with_observer<F>(
    problem: &Problem,
    config: &SolverConfig,
    mut observer: F,
) -> Result<RecoveryResult>
where
    F: FnMut(&IterationState<'_>) -> ControlFlow<()>,
{
    config.validate()?;
    let start = Instant::now();
    let init = initialize(problem, config.keep_rule)?;
    let (set_p, set_q) = constraint_sets(problem, config, &init)?;
    let mode = config.projection;
    let tol_dyk = config.dykstra_tol;

    let step = if config.safe_step {
        let l0_norm = init.svd.sigma.max();
        if l0_norm > 0.0 {
            config.step_size.min(1.0 / (192.0 * l0_norm))
        } else {
            config.step_size
        }
    } else {
        config.step_size
    };
    let theta = match config.threshold_rule {
        ThresholdRule::PaperMin => threshold_value(problem.alpha()),
        ThresholdRule::Custom(t) => t,
    };
    let spec = ThresholdSpec::new(theta, config.keep_rule);

    let mut factors = FactorPair::new(
        project_factor(&init.factors.p, set_p.as_ref(), mode, tol_dyk),
        project_factor(&init.factors.q, set_q.as_ref(), mode, tol_dyk),
    )?;
    let mut s = init.s.clone();
    let mut stop = StopReason::MaxIters;
    let early = observer(&IterationState {
        iteration: 0,
        factors: &factors,
        s: &s,
        residual: None,
    })
    .is_break();
    let init_elapsed = start.elapsed();
    let iter_start = Instant::now();

    let m = problem.m().as_matrix();
    let m_norm = m.norm();
    let mut history = Vec::new();
    let mut l = low_rank(&factors, problem);
    // `work` holds M − L, then the residual S − (M − L)
    let mut work = DMatrix::zeros(m.nrows(), m.ncols());
    let mut ws = ThresholdWorkspace::default();
    if early {
        stop = StopReason::Observer;
    }

    for iteration in 1..=config.max_iters {
        if stop == StopReason::Observer {
            break;
        }
        let xp = problem.lift_x(&factors.p);
        let yq = problem.lift_y(&factors.q);
        l.gemm(1.0, &xp, &yq.transpose(), 0.0);
        work.copy_from(m);
        work -= &l;
        threshold_into(&work, spec, &mut s, &mut ws);
        work.zip_apply(&s, |d, sv| *d = sv - *d);
        let delta = &work;
        let abs_res = delta.norm();
        let residual = if m_norm > 0.0 { abs_res / m_norm } else { abs_res };
        if !residual.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        history.push(residual);
        if residual < config.tol {
            stop = StopReason::Converged;
            break;
        }
        let (grad_p, grad_q) = gradients_from_residual(&factors, delta, &xp, &yq, problem);
        let p = project_factor(&(&factors.p - grad_p * step), set_p.as_ref(), mode, tol_dyk);
        let q = project_factor(&(&factors.q - grad_q * step), set_q.as_ref(), mode, tol_dyk);
        factors = FactorPair { p, q };
        if !factors.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        let flow = observer(&IterationState {
            iteration,
            factors: &factors,
            s: &s,
            residual: Some(residual),
        });
        if flow.is_break() {
            stop = StopReason::Observer;
        }
        if flow.is_break() || iteration == config.max_iters {
            // report the low-rank part of the final factors
            l = low_rank(&factors, problem);
        }
    }
    let iter_elapsed = iter_start.elapsed();

    Ok(RecoveryResult {
        l: DenseMatrix::from_matrix(l).map_err(|_| Error::Divergence {
            iteration: history.len(),
        })?,
        s: DenseMatrix::from_matrix(s).map_err(|_| Error::Divergence {
            iteration: history.len(),
        })?,
        factors,
        iterations_run: history.len(),
        residual_history: history,
        converged: stop == StopReason::Converged,
        stop_reason: stop,
        step_size: step,
        init_elapsed,
        iter_elapsed,
        elapsed: start.elapsed(),
    })
}
