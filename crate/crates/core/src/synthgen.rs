//! Seeded synthetic instances: Gaussian low-rank part, per-column sparse
//! corruption and features built from the true singular subspaces padded
//! with null-space directions.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`), a counter-based
//! stream cipher generator seeded from a single `u64`. Draw order is fixed:
//! J (column-major), K, corruption supports column by column, magnitudes and
//! signs, then the null-space Gaussians for X, the X permutation, and the
//! same two for Y.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::GroundTruth;
use crate::model::{DenseMatrix, FeaturePair, Problem};
use crate::solver::truncated_svd;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignModel {
    /// Independent ±1 with equal probability.
    BernoulliPM1,
    /// The sign of the low-rank entry being corrupted.
    CoherentSign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n1: usize,
    pub n2: usize,
    pub rank: usize,
    pub alpha: f64,
    pub sign_model: SignModel,
    /// Upper end of the uniform corruption magnitude; `None` means `rank/40`.
    pub magnitude_high: Option<f64>,
    /// Null-space vectors added to each feature beyond the true subspace.
    pub extra_basis: usize,
    /// Allowed excess of any row's corruption fraction over `alpha`.
    pub row_slack: f64,
    /// Variance of the entries of the low-rank factors.
    pub factor_variance: f64,
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            n1: 200,
            n2: 200,
            rank: 5,
            alpha: 0.1,
            sign_model: SignModel::BernoulliPM1,
            magnitude_high: None,
            extra_basis: 5,
            row_slack: 0.065,
            factor_variance: 5e-3,
            max_attempts: 200,
            seed: 0,
        }
    }
}

impl GenSpec {
    pub fn magnitude(&self) -> f64 {
        self.magnitude_high.unwrap_or(self.rank as f64 / 40.0)
    }

    /// Corrupted entries per column, `⌊α·n1⌋`.
    pub fn corruptions_per_column(&self) -> usize {
        (self.alpha * self.n1 as f64).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Spec("dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Spec(format!("alpha {} outside [0, 1)", self.alpha)));
        }
        if self.rank == 0 || self.rank > self.n1.min(self.n2) {
            return Err(Error::Spec(format!(
                "rank {} outside 1..={}",
                self.rank,
                self.n1.min(self.n2)
            )));
        }
        if self.rank + self.extra_basis > self.n1.min(self.n2) {
            return Err(Error::Spec(format!(
                "rank + extra_basis = {} exceeds the smaller dimension {}",
                self.rank + self.extra_basis,
                self.n1.min(self.n2)
            )));
        }
        if !(self.factor_variance > 0.0) || !(self.magnitude() >= 0.0) || !(self.row_slack >= 0.0) {
            return Err(Error::Spec("variance, magnitude and slack must be non-negative".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::Spec("max_attempts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Draws per-column supports until no row exceeds `α + slack`.
fn corruption_support<R: Rng>(spec: &GenSpec, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    let count = spec.corruptions_per_column();
    let row_cap = (spec.alpha + spec.row_slack) * spec.n2 as f64;
    for _ in 0..spec.max_attempts {
        let mut per_row = vec![0usize; spec.n1];
        let support: Vec<Vec<usize>> = (0..spec.n2)
            .map(|_| {
                let mut rows = rand::seq::index::sample(rng, spec.n1, count).into_vec();
                rows.sort_unstable();
                for &i in &rows {
                    per_row[i] += 1;
                }
                rows
            })
            .collect();
        if per_row.iter().all(|&c| c as f64 <= row_cap) {
            return Ok(support);
        }
    }
    Err(Error::Generation(format!(
        "no support with row corruption <= {:.4} after {} attempts",
        spec.alpha + spec.row_slack,
        spec.max_attempts
    )))
}

/// `basis` columns plus `extra` orthonormal vectors orthogonal to them, in
/// random column order.
fn padded_feature<R: Rng>(basis: &DMatrix<f64>, extra: usize, rng: &mut R) -> DMatrix<f64> {
    let (n, r) = basis.shape();
    let mut cols: Vec<nalgebra::DVector<f64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    if extra > 0 {
        let g = DMatrix::from_fn(n, extra, |_, _| StandardNormal.sample(rng));
        let mut null = &g - basis * basis.tr_mul(&g);
        // second pass removes what rounding left behind
        null -= basis * basis.tr_mul(&null);
        let q = null.qr().q();
        let mut q = &q - basis * basis.tr_mul(&q);
        for j in 0..extra {
            let c = q.column(j).normalize();
            q.set_column(j, &c);
        }
        cols.extend(q.column_iter().map(|c| c.into_owned()));
    }
    let mut order: Vec<usize> = (0..r + extra).collect();
    order.shuffle(rng);
    DMatrix::from_columns(&order.iter().map(|&k| cols[k].clone()).collect::<Vec<_>>())
}

/// Builds one instance and its ground truth.
pub fn generate(spec: &GenSpec) -> Result<(Problem, GroundTruth)> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let normal = Normal::new(0.0, spec.factor_variance.sqrt())
        .map_err(|e| Error::Spec(format!("bad variance: {e}")))?;
    let j = DMatrix::from_fn(spec.n1, spec.rank, |_, _| normal.sample(&mut rng));
    let k = DMatrix::from_fn(spec.n2, spec.rank, |_, _| normal.sample(&mut rng));
    let l_star = &j * k.transpose();

    let support = corruption_support(spec, &mut rng)?;
    let high = spec.magnitude();
    let mut s_star = DMatrix::zeros(spec.n1, spec.n2);
    for (col, rows) in support.iter().enumerate() {
        for &row in rows {
            let magnitude = if high > 0.0 { rng.random_range(0.0..high) } else { 0.0 };
            let sign = match spec.sign_model {
                SignModel::BernoulliPM1 => {
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                }
                SignModel::CoherentSign => l_star[(row, col)].signum(),
            };
            s_star[(row, col)] = sign * magnitude;
        }
    }

    let svd = truncated_svd(&l_star, spec.rank)?;
    let x = padded_feature(&svd.u, spec.extra_basis, &mut rng);
    let y = padded_feature(&svd.v, spec.extra_basis, &mut rng);
    let features = FeaturePair::new(DenseMatrix::from_matrix(x)?, DenseMatrix::from_matrix(y)?)?;
    let m = DenseMatrix::from_matrix(&l_star + &s_star)?;
    let problem = Problem::new(m, features.clone(), spec.rank, spec.alpha)?;
    let gt = GroundTruth::new(l_star, s_star, &features, spec.rank)?;
    Ok((problem, gt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::orthonormality_defect;

    fn spec(n: usize, rank: usize, alpha: f64, seed: u64) -> GenSpec {
        GenSpec {
            n1: n,
            n2: n,
            rank,
            alpha,
            seed,
            ..GenSpec::default()
        }
    }

    fn feasibility(problem: &Problem, gt: &GroundTruth) -> (f64, f64) {
        let x = problem.x();
        let y = problem.y();
        (
            (x * x.tr_mul(&gt.u_star) - &gt.u_star).norm(),
            (y * y.tr_mul(&gt.v_star) - &gt.v_star).norm(),
        )
    }

    #[test]
    fn clean_instance() {
        let (problem, gt) = generate(&spec(60, 3, 0.0, 1)).unwrap();
        assert_eq!(gt.s_star, DMatrix::zeros(60, 60));
        assert_eq!(problem.m().as_matrix(), &gt.l_star);
        let (fx, fy) = feasibility(&problem, &gt);
        assert!(fx < 1e-10 && fy < 1e-10);
        assert_eq!(problem.features().dims(), (8, 8));
    }

    #[test]
    fn coherent_signs_follow_low_rank() {
        let s = GenSpec {
            sign_model: SignModel::CoherentSign,
            row_slack: 1.0,
            ..spec(50, 1, 0.2, 2)
        };
        let (_, gt) = generate(&s).unwrap();
        let mut seen = 0;
        for (sv, lv) in gt.s_star.iter().zip(gt.l_star.iter()) {
            if *sv != 0.0 {
                assert_eq!(sv.signum(), lv.signum());
                seen += 1;
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn corruption_counts_and_determinism() {
        let s = spec(200, 10, 0.1, 77);
        let (p1, gt1) = generate(&s).unwrap();
        for j in 0..200 {
            let c = gt1.s_star.column(j).iter().filter(|v| **v != 0.0).count();
            assert_eq!(c, 20);
        }
        let max_row = (0..200)
            .map(|i| gt1.s_star.row(i).iter().filter(|v| **v != 0.0).count())
            .max()
            .unwrap();
        assert!(max_row as f64 / 200.0 <= 0.165);
        let (p2, gt2) = generate(&s).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(gt1.l_star, gt2.l_star);
        assert_eq!(gt1.s_star, gt2.s_star);
    }

    #[test]
    fn invariants_across_seeds() {
        for seed in 0..5 {
            let s = spec(150, 4, 0.15, seed);
            let (problem, gt) = generate(&s).unwrap();
            let (fx, fy) = feasibility(&problem, &gt);
            assert!(fx < 1e-10 && fy < 1e-10);
            assert!(orthonormality_defect(problem.x()) < 1e-10);
            assert!(orthonormality_defect(problem.y()) < 1e-10);
            assert!(gt.sigma_r() > 1e-10 * gt.sigma_1());
            let cap = ((0.15 + 0.065) * 150.0f64).floor() as usize + 1;
            for i in 0..150 {
                assert!(gt.s_star.row(i).iter().filter(|v| **v != 0.0).count() <= cap);
            }
            let mag = s.magnitude();
            assert!(gt.s_star.iter().all(|v| v.abs() < mag));
            assert_eq!(problem.alpha(), 0.15);
        }
    }

    #[test]
    fn different_seeds_differ() {
        let (a, _) = generate(&spec(30, 2, 0.0, 1)).unwrap();
        let (b, _) = generate(&spec(30, 2, 0.0, 2)).unwrap();
        assert_ne!(a.m(), b.m());
    }

    #[test]
    fn spec_errors() {
        assert!(matches!(generate(&spec(10, 0, 0.1, 0)), Err(Error::Spec(_))));
        assert!(matches!(generate(&spec(10, 6, 0.1, 0)), Err(Error::Spec(_))));
        assert!(matches!(generate(&spec(10, 2, 1.0, 0)), Err(Error::Spec(_))));
    }

    #[test]
    fn rejection_exhaustion() {
        let s = GenSpec {
            row_slack: 0.0,
            max_attempts: 3,
            ..spec(40, 2, 0.3, 0)
        };
        assert!(matches!(generate(&s), Err(Error::Generation(_))));
    }

    #[test]
    fn rectangular_instances() {
        let s = GenSpec {
            n1: 40,
            n2: 70,
            ..spec(0, 3, 0.1, 5)
        };
        let (problem, gt) = generate(&s).unwrap();
        assert_eq!(problem.shape(), (40, 70));
        let (fx, fy) = feasibility(&problem, &gt);
        assert!(fx < 1e-10 && fy < 1e-10);
    }
}
