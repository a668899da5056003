//! Row-norm constraint sets on the factors and projections onto them.
//!
//! For feature `X` (n×d) the set is `{A ∈ ℝ^{d×r} : ‖X_{i·} A‖₂ ≤ c_i ∀i}`,
//! i.e. the intersection of `n` closed convex sets, one per feature row.
//! Each single set has a closed-form projection; the intersection is reached
//! with cyclic Dykstra.

use nalgebra::{DMatrix, RowDVector};

use crate::error::{Error, Result};
use crate::model::ProjectionMode;

/// Per-row caps `c_i` on `‖X_{i·} A‖₂`.
#[derive(Clone, Debug, PartialEq)]
pub struct RowNormBudget {
    feature: DMatrix<f64>,
    caps: Vec<f64>,
}

impl RowNormBudget {
    pub fn new(feature: DMatrix<f64>, caps: Vec<f64>) -> Result<Self> {
        if caps.len() != feature.nrows() {
            return Err(Error::Dimension(format!(
                "{} caps for a feature with {} rows",
                caps.len(),
                feature.nrows()
            )));
        }
        if let Some(c) = caps.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::Config(format!("row caps must be positive, got {c}")));
        }
        Ok(Self { feature, caps })
    }

    pub fn uniform(feature: DMatrix<f64>, cap: f64) -> Result<Self> {
        let n = feature.nrows();
        Self::new(feature, vec![cap; n])
    }

    /// The budget `√(2 μ1 r / n) ‖F0‖₂` for the initial factor `F0`.
    pub fn incoherence_cap(mu1: f64, rank: usize, n: usize, initial_spectral_norm: f64) -> f64 {
        (2.0 * mu1 * rank as f64 / n as f64).sqrt() * initial_spectral_norm
    }

    pub fn feature(&self) -> &DMatrix<f64> {
        &self.feature
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn len(&self) -> usize {
        self.caps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.caps.is_empty()
    }

    /// `Σ_i max(0, ‖X_{i·}A‖₂ − c_i)²`
    pub fn violation(&self, a: &DMatrix<f64>) -> f64 {
        let xa = &self.feature * a;
        (0..self.len())
            .map(|i| (xa.row(i).norm() - self.caps[i]).max(0.0).powi(2))
            .sum()
    }

    /// `max_i (‖X_{i·}A‖₂ − c_i)₊`
    pub fn max_violation(&self, a: &DMatrix<f64>) -> f64 {
        let xa = &self.feature * a;
        (0..self.len())
            .map(|i| (xa.row(i).norm() - self.caps[i]).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Frobenius-nearest point to `p` in `{A : ‖x A‖₂ ≤ cap}` for a row `x`.
///
/// When the constraint is violated the answer is
/// `(I + γ xᵀx)⁻¹ p` with `γ = (‖xp‖/cap − 1)/‖x‖²`; by Sherman–Morrison this
/// equals `p − ((1 − cap/‖xp‖)/‖x‖²) xᵀ(xp)`.
pub fn project_single_row(p: &DMatrix<f64>, x: &RowDVector<f64>, cap: f64) -> Result<DMatrix<f64>> {
    let xp = x * p;
    let norm = xp.norm();
    if norm <= cap {
        return Ok(p.clone());
    }
    let xx = x.norm_squared();
    if xx == 0.0 {
        return Err(Error::InfeasibleRow { row: 0 });
    }
    let coef = (1.0 - cap / norm) / xx;
    Ok(p - (x.transpose() * xp) * coef)
}

/// Projection onto the single set of row `i` of the budget.
pub fn project_single(p: &DMatrix<f64>, budget: &RowNormBudget, i: usize) -> Result<DMatrix<f64>> {
    let x = budget.feature.row(i).into_owned();
    project_single_row(p, &x, budget.caps[i]).map_err(|e| match e {
        Error::InfeasibleRow { .. } => Error::InfeasibleRow { row: i },
        other => other,
    })
}

/// Outcome of a Dykstra run.
#[derive(Clone, Debug)]
pub struct DykstraOutcome {
    pub point: DMatrix<f64>,
    pub cycles: usize,
}

/// Cyclic Dykstra over all row sets of `budget`, at most `max_cycles` full
/// sweeps, stopping early once a sweep moves the iterate by less than `tol`
/// (Frobenius, accumulated over the sweep).
///
/// Every correction term is a multiple of its own feature row, `x_iᵀ w_i`,
/// so only the `r`-vectors `w_i` are stored.
pub fn dykstra_project(
    p: &DMatrix<f64>,
    budget: &RowNormBudget,
    max_cycles: usize,
    tol: f64,
) -> DykstraOutcome {
    let (d, r) = p.shape();
    let n = budget.len();
    let mut a = p.clone();
    let mut w = DMatrix::<f64>::zeros(n, r);
    let row_sq: Vec<f64> = (0..n).map(|i| budget.feature.row(i).norm_squared()).collect();
    let mut xa = RowDVector::<f64>::zeros(r);
    let mut cycles = 0;
    while cycles < max_cycles {
        let mut moved = 0.0;
        for i in 0..n {
            let x = budget.feature.row(i);
            // y = a + x_iᵀ w_i ;  x_i y = x_i a + ‖x_i‖² w_i
            xa.copy_from(&(x * &a));
            let wi = w.row(i).into_owned();
            let xy = &xa + &wi * row_sq[i];
            let norm = xy.norm();
            let cap = budget.caps[i];
            // a_new = y − coef·x_iᵀ(x_i y), new correction = coef·(x_i y)
            let coef = if norm > cap && row_sq[i] > 0.0 {
                (1.0 - cap / norm) / row_sq[i]
            } else {
                0.0
            };
            let new_w = &xy * coef;
            // a_new − a = x_iᵀ (w_i − new_w)
            let delta = &wi - &new_w;
            let dn = delta.norm_squared();
            if dn > 0.0 {
                for k in 0..d {
                    let xk = x[k];
                    if xk != 0.0 {
                        for c in 0..r {
                            a[(k, c)] += xk * delta[c];
                        }
                    }
                }
                moved += row_sq[i] * dn;
            }
            w.row_mut(i).copy_from(&new_w);
        }
        cycles += 1;
        if moved.sqrt() < tol {
            break;
        }
    }
    DykstraOutcome { point: a, cycles }
}

/// `Π_𝒫(p)` under the configured projection mode.
pub fn project_factor(
    p: &DMatrix<f64>,
    budget: Option<&RowNormBudget>,
    mode: ProjectionMode,
    tol: f64,
) -> DMatrix<f64> {
    match (mode, budget) {
        (ProjectionMode::SetProjection { dykstra_iters }, Some(b)) => {
            dykstra_project(p, b, dykstra_iters, tol).point
        }
        _ => p.clone(),
    }
}
