use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which incoherence assumption the run is made under.
///
/// Case (i) bounds the row norms of the true singular vectors, case (ii) the
/// row norms of the features, case (iii) both. Only cases (i) and (iii)
/// admit the row-norm constraint sets on the factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IncoherenceCase {
    CaseI,
    CaseII,
    CaseIII,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Mu1 {
    Given(f64),
    /// Estimated from the initialization factors.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProjectionMode {
    None,
    SetProjection { dykstra_iters: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ThresholdRule {
    /// `α + min(10α, 0.1)` in the descent phase.
    PaperMin,
    Custom(f64),
}

/// How the row and column order statistics combine in hard thresholding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KeepRule {
    /// Zero an entry only when it is small in both its row and its column.
    ZeroIfBelowBoth,
    /// Keep an entry only when it is large in both its row and its column.
    KeepIfAboveBoth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeaturePolicy {
    Orthonormalize,
    Strict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub step_size: f64,
    /// Cap the step at `1/(192‖L0‖₂)`.
    pub safe_step: bool,
    pub max_iters: usize,
    pub tol: f64,
    pub incoherence_case: IncoherenceCase,
    pub mu1: Mu1,
    pub projection: ProjectionMode,
    /// Early-exit threshold on the cycle-to-cycle change inside Dykstra.
    pub dykstra_tol: f64,
    pub threshold_rule: ThresholdRule,
    pub keep_rule: KeepRule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: 0.5,
            safe_step: false,
            max_iters: 3000,
            tol: 1e-7,
            incoherence_case: IncoherenceCase::CaseIII,
            mu1: Mu1::Auto,
            projection: ProjectionMode::None,
            dykstra_tol: 1e-12,
            threshold_rule: ThresholdRule::PaperMin,
            keep_rule: KeepRule::ZeroIfBelowBoth,
        }
    }
}

pub const DEFAULT_DYKSTRA_ITERS: usize = 100;

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if let Mu1::Given(mu) = self.mu1 {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::Config(format!("mu1 must be positive, got {mu}")));
            }
        }
        if let ThresholdRule::Custom(t) = self.threshold_rule {
            if t.is_nan() {
                return Err(Error::Config("custom threshold is NaN".into()));
            }
        }
        if matches!(self.projection, ProjectionMode::SetProjection { .. })
            && self.incoherence_case == IncoherenceCase::CaseII
        {
            return Err(Error::Config(
                "case (ii) has no factor constraint sets; use projection none".into(),
            ));
        }
        Ok(())
    }
}
