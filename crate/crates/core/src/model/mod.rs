//! Domain types shared by every other module.

mod config;
pub mod io;
mod matrix;

pub use config::{
    FeaturePolicy, IncoherenceCase, KeepRule, Mu1, ProjectionMode, SolverConfig, ThresholdRule,
    DEFAULT_DYKSTRA_ITERS,
};
pub use matrix::{max_abs, max_row_norm, orthonormalize, spectral_norm, DenseMatrix};

use std::time::Duration;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Tolerance on ‖XᵀX − I‖_F accepted as orthonormal.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Orthonormal feature dictionaries `X` (n1×d1) and `Y` (n2×d2).
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePair {
    x: DenseMatrix,
    y: DenseMatrix,
    x_is_identity: bool,
    y_is_identity: bool,
}

impl FeaturePair {
    /// Builds the pair, orthonormalizing non-orthonormal inputs.
    pub fn new(x: DenseMatrix, y: DenseMatrix) -> Result<Self> {
        Self::with_policy(x, y, FeaturePolicy::Orthonormalize)
    }

    pub fn with_policy(x: DenseMatrix, y: DenseMatrix, policy: FeaturePolicy) -> Result<Self> {
        let x = admit_feature(x, policy)?;
        let y = admit_feature(y, policy)?;
        Ok(Self {
            x_is_identity: is_identity(x.as_matrix()),
            y_is_identity: is_identity(y.as_matrix()),
            x,
            y,
        })
    }

    /// `X = I_{n1}`, `Y = I_{n2}`: features that carry no information.
    pub fn identity(n1: usize, n2: usize) -> Self {
        Self {
            x: DenseMatrix::identity(n1),
            y: DenseMatrix::identity(n2),
            x_is_identity: true,
            y_is_identity: true,
        }
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn y(&self) -> &DenseMatrix {
        &self.y
    }

    /// (d1, d2)
    pub fn dims(&self) -> (usize, usize) {
        (self.x.cols(), self.y.cols())
    }

    pub fn is_identity(&self) -> bool {
        self.x_is_identity && self.y_is_identity
    }
}

fn is_identity(m: &DMatrix<f64>) -> bool {
    m.is_square()
        && m
            .column_iter()
            .enumerate()
            .all(|(j, c)| c.iter().enumerate().all(|(i, v)| *v == if i == j { 1.0 } else { 0.0 }))
}

fn lift(f: &DMatrix<f64>, identity: bool, a: &DMatrix<f64>) -> DMatrix<f64> {
    if identity {
        a.clone()
    } else {
        f * a
    }
}

fn reduce(f: &DMatrix<f64>, identity: bool, a: &DMatrix<f64>) -> DMatrix<f64> {
    if identity {
        a.clone()
    } else {
        f.transpose() * a
    }
}

/// ‖AᵀA − I‖_F
pub fn orthonormality_defect(a: &DMatrix<f64>) -> f64 {
    let k = a.ncols();
    (a.transpose() * a - DMatrix::<f64>::identity(k, k)).norm()
}

fn admit_feature(a: DenseMatrix, policy: FeaturePolicy) -> Result<DenseMatrix> {
    if a.cols() > a.rows() {
        return Err(Error::Dimension(format!(
            "feature has {} columns but only {} rows",
            a.cols(),
            a.rows()
        )));
    }
    let deviation = orthonormality_defect(a.as_matrix());
    if deviation <= ORTHONORMAL_TOL {
        return Ok(a);
    }
    match policy {
        FeaturePolicy::Orthonormalize => orthonormalize(&a),
        FeaturePolicy::Strict => Err(Error::NotOrthonormal { deviation }),
    }
}

/// Solver input: observation, features, target rank and corruption fraction.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    m: DenseMatrix,
    features: FeaturePair,
    rank: usize,
    alpha: f64,
}

impl Problem {
    pub fn new(m: DenseMatrix, features: FeaturePair, rank: usize, alpha: f64) -> Result<Self> {
        let (n1, n2) = m.shape();
        if features.x().rows() != n1 || features.y().rows() != n2 {
            return Err(Error::Dimension(format!(
                "observation is {n1}x{n2} but features have {} and {} rows",
                features.x().rows(),
                features.y().rows()
            )));
        }
        let (d1, d2) = features.dims();
        if rank == 0 || rank > d1.min(d2) {
            return Err(Error::Rank(format!(
                "rank {rank} must lie in 1..={}",
                d1.min(d2)
            )));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Config(format!("alpha {alpha} must lie in [0, 1)")));
        }
        Ok(Self {
            m,
            features,
            rank,
            alpha,
        })
    }

    pub fn m(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn features(&self) -> &FeaturePair {
        &self.features
    }

    pub fn x(&self) -> &DMatrix<f64> {
        self.features.x().as_matrix()
    }

    /// `X A`, skipping the product when `X` is the identity.
    pub fn lift_x(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        lift(self.x(), self.features.x_is_identity, a)
    }

    pub fn lift_y(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        lift(self.y(), self.features.y_is_identity, a)
    }

    /// `Xᵀ A`, skipping the product when `X` is the identity.
    pub fn reduce_x(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        reduce(self.x(), self.features.x_is_identity, a)
    }

    pub fn reduce_y(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        reduce(self.y(), self.features.y_is_identity, a)
    }

    pub fn y(&self) -> &DMatrix<f64> {
        self.features.y().as_matrix()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn shape(&self) -> (usize, usize) {
        self.m.shape()
    }

    /// Same instance with `X = I`, `Y = I`.
    pub fn with_identity_features(&self) -> Result<Self> {
        let (n1, n2) = self.shape();
        Self::new(
            self.m.clone(),
            FeaturePair::identity(n1, n2),
            self.rank,
            self.alpha,
        )
    }
}

/// Factor iterate `(P, Q)`; the low-rank estimate is `X P Qᵀ Yᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorPair {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl FactorPair {
    pub fn new(p: DMatrix<f64>, q: DMatrix<f64>) -> Result<Self> {
        if p.ncols() != q.ncols() {
            return Err(Error::Dimension(format!(
                "factor ranks differ: P has {} columns, Q has {}",
                p.ncols(),
                q.ncols()
            )));
        }
        Ok(Self { p, q })
    }

    pub fn rank(&self) -> usize {
        self.p.ncols()
    }

    /// `X P Qᵀ Yᵀ`, evaluated as `(X P)(Y Q)ᵀ`.
    pub fn low_rank(&self, x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
        (x * &self.p) * (y * &self.q).transpose()
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(self.q.iter()).all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum StopReason {
    Converged,
    MaxIters,
    /// An observer asked the solver to stop.
    Observer,
}

/// Output of a solve.
#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub l: DenseMatrix,
    pub s: DenseMatrix,
    pub factors: FactorPair,
    pub iterations_run: usize,
    /// ‖M − L − S‖_F / ‖M‖_F after each iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Step size actually used (differs from the configured one in safe-step mode).
    pub step_size: f64,
    pub init_elapsed: Duration,
    pub iter_elapsed: Duration,
    pub elapsed: Duration,
}

impl RecoveryResult {
    pub fn final_residual(&self) -> Option<f64> {
        self.residual_history.last().copied()
    }
}
