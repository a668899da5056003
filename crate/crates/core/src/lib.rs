//! Robust principal component analysis with feature side information.
//!
//! An observation `M` is split into a low-rank part `L = X P Qᵀ Yᵀ` and a
//! sparse part `S`. The factors `P`, `Q` live in the (small) feature
//! coordinates given by the orthonormal dictionaries `X`, `Y`. The solver
//! seeds `S` by row/column hard thresholding, takes a truncated SVD of the
//! remainder, then runs projected gradient descent on the factors while
//! re-estimating `S` every step.
//!
//! Besides the solver the crate ships the pieces needed to study it: the
//! rotation-invariant factor distance, incoherence and corruption-bound
//! calculators, a seeded synthetic problem generator and experiment drivers
//! for phase-transition grids, timing sweeps and projection sweeps.

pub mod cli;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod projection;
pub mod solver;
pub mod synthgen;
pub mod threshold;

pub use error::{Error, Result};
pub use model::{
    DenseMatrix, FactorPair, FeaturePair, IncoherenceCase, KeepRule, Problem, ProjectionMode,
    RecoveryResult, SolverConfig, StopReason, ThresholdRule,
};
