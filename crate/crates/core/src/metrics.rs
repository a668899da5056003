//! Evaluation quantities: factor distance, relative error, incoherence,
//! corruption-bound calculators and numerical lemma checks.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{max_abs, max_row_norm, spectral_norm, FactorPair, FeaturePair, IncoherenceCase};
use crate::solver::truncated_svd;
use crate::synthgen::seeded_rng;

/// Ground truth of a synthetic instance.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    pub l_star: DMatrix<f64>,
    pub s_star: DMatrix<f64>,
    pub u_star: DMatrix<f64>,
    pub v_star: DMatrix<f64>,
    pub sigma_star: DVector<f64>,
    /// `P* = Xᵀ U* Σ*^{1/2}`, `Q* = Yᵀ V* Σ*^{1/2}`.
    pub factors_star: FactorPair,
}

impl GroundTruth {
    /// Decomposes `l_star` at rank `r` and maps its factors into feature
    /// coordinates.
    pub fn new(
        l_star: DMatrix<f64>,
        s_star: DMatrix<f64>,
        features: &FeaturePair,
        r: usize,
    ) -> Result<Self> {
        let svd = truncated_svd(&l_star, r)?;
        let root = DMatrix::from_diagonal(&svd.sigma.map(f64::sqrt));
        let p = features.x().as_matrix().tr_mul(&(&svd.u * &root));
        let q = features.y().as_matrix().tr_mul(&(&svd.v * &root));
        Ok(Self {
            l_star,
            s_star,
            u_star: svd.u,
            v_star: svd.v,
            sigma_star: svd.sigma,
            factors_star: FactorPair::new(p, q)?,
        })
    }

    pub fn rank(&self) -> usize {
        self.sigma_star.len()
    }

    pub fn sigma_1(&self) -> f64 {
        self.sigma_star[0]
    }

    pub fn sigma_r(&self) -> f64 {
        self.sigma_star[self.rank() - 1]
    }

    /// κ = σ₁*/σ_r*
    pub fn condition_number(&self) -> f64 {
        self.sigma_1() / self.sigma_r()
    }

    /// μ1: the smallest constant for which both singular-vector row-norm
    /// conditions hold.
    pub fn mu1(&self) -> f64 {
        incoherence(&self.u_star).max(incoherence(&self.v_star))
    }
}

/// `min_R √(‖A − A*R‖²_F + ‖B − B*R‖²_F)` over orthogonal `R`.
///
/// The minimizer is the orthogonal Procrustes solution `R = Ū V̄ᵀ` where
/// `Ū Σ̄ V̄ᵀ` is the SVD of `A*ᵀA + B*ᵀB`. Reflections are allowed.
pub fn factor_distance(current: &FactorPair, target: &FactorPair) -> Result<f64> {
    let r = current.rank();
    if target.rank() != r {
        return Err(Error::Dimension(format!(
            "factor ranks differ: {r} vs {}",
            target.rank()
        )));
    }
    if current.p.nrows() != target.p.nrows() || current.q.nrows() != target.q.nrows() {
        return Err(Error::Dimension(format!(
            "factor rows differ: ({}, {}) vs ({}, {})",
            current.p.nrows(),
            current.q.nrows(),
            target.p.nrows(),
            target.q.nrows()
        )));
    }
    let rot = procrustes_rotation(current, target)?;
    let dp = &current.p - &target.p * &rot;
    let dq = &current.q - &target.q * &rot;
    Ok((dp.norm_squared() + dq.norm_squared()).sqrt())
}

/// The orthogonal `R` aligning `target` to `current`.
pub fn procrustes_rotation(current: &FactorPair, target: &FactorPair) -> Result<DMatrix<f64>> {
    let cross = target.p.tr_mul(&current.p) + target.q.tr_mul(&current.q);
    let (u, _, v) = crate::linalg::thin_svd(&cross)?;
    Ok(u * v.transpose())
}

/// `‖L − L*‖_F / ‖L*‖_F`
pub fn relative_error(l: &DMatrix<f64>, l_star: &DMatrix<f64>) -> Result<f64> {
    if l.shape() != l_star.shape() {
        return Err(Error::Dimension(format!(
            "{:?} vs {:?}",
            l.shape(),
            l_star.shape()
        )));
    }
    let denom = l_star.norm();
    if denom == 0.0 {
        return Err(Error::Degenerate("reference matrix is zero".into()));
    }
    Ok((l - l_star).norm() / denom)
}

/// `(n/k)·‖U‖²_{2,∞}` for an n×k matrix with orthonormal columns.
///
/// With `k = r` this is μ for the singular-vector condition; for a feature
/// matrix `k = d` gives the feature condition.
pub fn incoherence(u: &DMatrix<f64>) -> f64 {
    let (n, k) = u.shape();
    n as f64 / k as f64 * max_row_norm(u).powi(2)
}

/// Corruption bounds for one instance.
#[derive(Clone, Debug, Serialize)]
pub struct TheoryBounds {
    pub case: IncoherenceCase,
    pub mu1: f64,
    pub mu2: f64,
    pub kappa: f64,
    pub sigma_1: f64,
    pub rank: usize,
    pub d1: usize,
    pub d2: usize,
    /// Largest α for which the initialization guarantee applies.
    pub alpha_init_bound: f64,
    /// Linear-convergence corruption bound evaluated with every unspecified
    /// absolute constant set to 1. Only its scaling is meaningful.
    pub alpha_descent_bound: f64,
    /// Always true: `alpha_descent_bound` holds up to an absolute constant.
    pub descent_bound_up_to_constant: bool,
    /// Initial-distance bound evaluated at `α = alpha_init_bound`.
    pub init_distance_bound: f64,
}

impl TheoryBounds {
    /// Initial-distance bound at corruption fraction `alpha`.
    pub fn init_distance_bound_at(&self, alpha: f64) -> f64 {
        init_distance_bound(
            self.case, alpha, self.kappa, self.rank, self.mu1, self.mu2, self.d1, self.d2,
            self.sigma_1,
        )
    }
}

/// `1/(16κrμ1)` in cases (i)/(iii), `1/(16κμ2√(d1d2))` in case (ii).
pub fn alpha_init_bound(
    case: IncoherenceCase,
    kappa: f64,
    rank: usize,
    mu1: f64,
    mu2: f64,
    d1: usize,
    d2: usize,
) -> f64 {
    let v = match case {
        IncoherenceCase::CaseI | IncoherenceCase::CaseIII => 1.0 / (16.0 * kappa * rank as f64 * mu1),
        IncoherenceCase::CaseII => 1.0 / (16.0 * kappa * mu2 * ((d1 * d2) as f64).sqrt()),
    };
    v.min(1.0)
}

/// `18αrμ1√(rκσ1*)` in cases (i)/(iii), `18αμ2√(r d1 d2 κ σ1*)` in case (ii).
#[allow(clippy::too_many_arguments)]
pub fn init_distance_bound(
    case: IncoherenceCase,
    alpha: f64,
    kappa: f64,
    rank: usize,
    mu1: f64,
    mu2: f64,
    d1: usize,
    d2: usize,
    sigma_1: f64,
) -> f64 {
    let r = rank as f64;
    match case {
        IncoherenceCase::CaseI | IncoherenceCase::CaseIII => {
            18.0 * alpha * r * mu1 * (r * kappa * sigma_1).sqrt()
        }
        IncoherenceCase::CaseII => {
            18.0 * alpha * mu2 * (r * (d1 * d2) as f64 * kappa * sigma_1).sqrt()
        }
    }
}

/// Descent-phase bound with unit constants. Case (ii) and (iii) use
/// `d = max(d1, d2)`.
pub fn alpha_descent_bound(
    case: IncoherenceCase,
    kappa: f64,
    rank: usize,
    mu1: f64,
    mu2: f64,
    d1: usize,
    d2: usize,
) -> f64 {
    let r = rank as f64;
    let d = d1.max(d2) as f64;
    let case_i = 1.0 / (mu1 * (kappa * r).powf(1.5));
    let v = match case {
        IncoherenceCase::CaseI => case_i,
        IncoherenceCase::CaseII => 1.0 / (mu2 * d * r.sqrt() * kappa.powf(1.5)),
        IncoherenceCase::CaseIII => (1.0 / (mu2 * d * kappa)).min(case_i),
    };
    v.min(1.0)
}

/// Evaluates every bound from ground-truth constants.
pub fn theory_bounds(gt: &GroundTruth, features: &FeaturePair, case: IncoherenceCase) -> TheoryBounds {
    let kappa = gt.condition_number();
    let mu1 = gt.mu1();
    let mu2 = incoherence(features.x().as_matrix()).max(incoherence(features.y().as_matrix()));
    let (d1, d2) = features.dims();
    let rank = gt.rank();
    let a_init = alpha_init_bound(case, kappa, rank, mu1, mu2, d1, d2);
    TheoryBounds {
        case,
        mu1,
        mu2,
        kappa,
        sigma_1: gt.sigma_1(),
        rank,
        d1,
        d2,
        alpha_init_bound: a_init,
        alpha_descent_bound: alpha_descent_bound(case, kappa, rank, mu1, mu2, d1, d2),
        descent_bound_up_to_constant: true,
        init_distance_bound: init_distance_bound(
            case, a_init, kappa, rank, mu1, mu2, d1, d2, gt.sigma_1(),
        ),
    }
}

/// One `(instance, metric, value)` line of a metrics report.
#[derive(Clone, Debug, Serialize)]
pub struct MetricRow {
    pub instance: String,
    pub metric: String,
    pub value: f64,
}

pub fn write_metric_csv<W: Write>(rows: &[MetricRow], mut out: W) -> Result<()> {
    writeln!(out, "instance,metric,value")?;
    for row in rows {
        writeln!(out, "{},{},{:?}", row.instance, row.metric, row.value)?;
    }
    Ok(())
}

/// Slack allowed on each lemma inequality, relative to the larger side.
pub const LEMMA_SLACK: f64 = 1e-10;

#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct LemmaTally {
    pub trials: usize,
    pub passed: usize,
}

#[derive(Clone, Debug, Default, Serialize, PartialEq, Eq)]
pub struct LemmaReport {
    /// `‖A‖₂ ≤ βn‖A‖_∞` for β-sparse rows and columns.
    pub sparse_spectral: LemmaTally,
    /// `‖A‖_∞ ≤ ‖Σ‖₂‖U‖_{2,∞}‖V‖_{2,∞}`.
    pub entry_bound: LemmaTally,
    /// `d(XᵀA, YᵀB, XᵀC, YᵀD) ≤ d(A, B, C, D)`.
    pub feature_contraction: LemmaTally,
}

#[derive(Serialize)]
struct Counterexample<'a> {
    lhs: f64,
    rhs: f64,
    matrices: Vec<(&'a str, usize, usize, Vec<f64>)>,
}

fn serialize_counterexample(lhs: f64, rhs: f64, mats: &[(&'static str, &DMatrix<f64>)]) -> String {
    let ce = Counterexample {
        lhs,
        rhs,
        matrices: mats
            .iter()
            .map(|(name, m)| {
                let rows = m.nrows();
                let cols = m.ncols();
                let data = (0..rows).flat_map(|i| (0..cols).map(move |j| m[(i, j)])).collect();
                (*name, rows, cols, data)
            })
            .collect(),
    };
    serde_json::to_string(&ce).unwrap_or_default()
}

fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + LEMMA_SLACK * lhs.abs().max(rhs.abs()).max(1.0)
}

fn gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// n×n matrix with exactly `k` nonzeros in every row and column.
pub fn random_regular_sparse<R: Rng>(n: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    let mut row_perm: Vec<usize> = (0..n).collect();
    let mut col_perm: Vec<usize> = (0..n).collect();
    row_perm.shuffle(rng);
    col_perm.shuffle(rng);
    let shifts = rand::seq::index::sample(rng, n, k);
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for s in shifts.iter() {
            let v: f64 = StandardNormal.sample(rng);
            a[(row_perm[i], col_perm[(i + s) % n])] = v;
        }
    }
    a
}

fn check_sparse_spectral<R: Rng>(rng: &mut R) -> Result<()> {
    let n = rng.random_range(2..=24);
    let k = rng.random_range(1..=n);
    let a = random_regular_sparse(n, k, rng);
    let beta = k as f64 / n as f64;
    let lhs = spectral_norm(&a);
    let rhs = beta * n as f64 * max_abs(&a);
    if holds(lhs, rhs) {
        Ok(())
    } else {
        Err(Error::LemmaViolation {
            lemma: "sparse spectral bound".into(),
            counterexample: serialize_counterexample(lhs, rhs, &[("A", &a)]),
        })
    }
}

fn check_entry_bound<R: Rng>(rng: &mut R) -> Result<()> {
    let n1 = rng.random_range(2..=20);
    let n2 = rng.random_range(2..=20);
    let r = rng.random_range(1..=n1.min(n2));
    let a = gaussian(n1, r, rng) * gaussian(r, n2, rng);
    let svd = truncated_svd(&a, r)?;
    let lhs = max_abs(&a);
    let rhs = svd.sigma[0] * max_row_norm(&svd.u) * max_row_norm(&svd.v);
    if holds(lhs, rhs) {
        Ok(())
    } else {
        Err(Error::LemmaViolation {
            lemma: "entry bound".into(),
            counterexample: serialize_counterexample(lhs, rhs, &[("A", &a)]),
        })
    }
}

fn orthonormal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    gaussian(rows, cols, rng).qr().q()
}

fn check_feature_contraction<R: Rng>(rng: &mut R) -> Result<()> {
    let n1 = rng.random_range(2..=20);
    let n2 = rng.random_range(2..=20);
    let d1 = rng.random_range(1..=n1);
    let d2 = rng.random_range(1..=n2);
    let r = rng.random_range(1..=4);
    let x = orthonormal(n1, d1, rng);
    let y = orthonormal(n2, d2, rng);
    let a = gaussian(n1, r, rng);
    let b = gaussian(n2, r, rng);
    let c = gaussian(n1, r, rng);
    let d = gaussian(n2, r, rng);
    let lhs = factor_distance(
        &FactorPair::new(x.tr_mul(&a), y.tr_mul(&b))?,
        &FactorPair::new(x.tr_mul(&c), y.tr_mul(&d))?,
    )?;
    let rhs = factor_distance(&FactorPair::new(a.clone(), b.clone())?, &FactorPair::new(c.clone(), d.clone())?)?;
    if holds(lhs, rhs) {
        Ok(())
    } else {
        Err(Error::LemmaViolation {
            lemma: "feature contraction".into(),
            counterexample: serialize_counterexample(
                lhs,
                rhs,
                &[("X", &x), ("Y", &y), ("A", &a), ("B", &b), ("C", &c), ("D", &d)],
            ),
        })
    }
}

/// Runs `trials` random instances of each lemma; the first violation is
/// returned as an error carrying the counterexample.
pub fn lemma_property_checks(trials: usize, seed: u64) -> Result<LemmaReport> {
    let mut rng = seeded_rng(seed);
    let mut report = LemmaReport::default();
    for _ in 0..trials {
        check_sparse_spectral(&mut rng)?;
        report.sparse_spectral.trials += 1;
        report.sparse_spectral.passed += 1;
        check_entry_bound(&mut rng)?;
        report.entry_bound.trials += 1;
        report.entry_bound.passed += 1;
        check_feature_contraction(&mut rng)?;
        report.feature_contraction.trials += 1;
        report.feature_contraction.passed += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DenseMatrix;
    use proptest::prelude::*;

    fn pair(p: DMatrix<f64>, q: DMatrix<f64>) -> FactorPair {
        FactorPair::new(p, q).unwrap()
    }

    fn rotation(theta: f64, reflect: bool) -> DMatrix<f64> {
        let (s, c) = theta.sin_cos();
        let m = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        if reflect {
            m * DMatrix::from_row_slice(2, 2, &[1., 0., 0., -1.])
        } else {
            m
        }
    }

    #[test]
    fn distance_zero_cases() {
        let mut rng = seeded_rng(1);
        let a = gaussian(6, 2, &mut rng);
        let b = gaussian(5, 2, &mut rng);
        let t = pair(a.clone(), b.clone());
        assert!(factor_distance(&t, &t).unwrap() < 1e-14);
        let r0 = rotation(0.7, true);
        let rotated = pair(&a * &r0, &b * &r0);
        assert!(factor_distance(&rotated, &t).unwrap() < 1e-12);
    }

    #[test]
    fn distance_rank_one_two_point_oracle() {
        let mut rng = seeded_rng(2);
        for _ in 0..50 {
            let cur = pair(gaussian(7, 1, &mut rng), gaussian(4, 1, &mut rng));
            let tgt = pair(gaussian(7, 1, &mut rng), gaussian(4, 1, &mut rng));
            let oracle = [1.0, -1.0]
                .iter()
                .map(|s| {
                    ((&cur.p - &tgt.p * *s).norm_squared() + (&cur.q - &tgt.q * *s).norm_squared())
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((factor_distance(&cur, &tgt).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_rank_two_matches_group_sweep() {
        let mut rng = seeded_rng(3);
        for _ in 0..10 {
            let cur = pair(gaussian(6, 2, &mut rng), gaussian(5, 2, &mut rng));
            let tgt = pair(gaussian(6, 2, &mut rng), gaussian(5, 2, &mut rng));
            let mut best = f64::INFINITY;
            for k in 0..1800 {
                let th = k as f64 * std::f64::consts::TAU / 1800.0;
                for reflect in [false, true] {
                    let r = rotation(th, reflect);
                    let v = ((&cur.p - &tgt.p * &r).norm_squared()
                        + (&cur.q - &tgt.q * &r).norm_squared())
                    .sqrt();
                    best = best.min(v);
                }
            }
            let d = factor_distance(&cur, &tgt).unwrap();
            assert!(d <= best + 1e-12);
            assert!((d - best).abs() < 1e-3);
        }
    }

    #[test]
    fn distance_rank_mismatch() {
        let a = pair(DMatrix::zeros(3, 2), DMatrix::zeros(3, 2));
        let b = pair(DMatrix::zeros(3, 1), DMatrix::zeros(3, 1));
        assert!(matches!(factor_distance(&a, &b), Err(Error::Dimension(_))));
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_gauge_invariant(seed in any::<u64>(), th in 0.0f64..6.3) {
            let mut rng = seeded_rng(seed);
            let a = pair(gaussian(6, 2, &mut rng), gaussian(4, 2, &mut rng));
            let b = pair(gaussian(6, 2, &mut rng), gaussian(4, 2, &mut rng));
            let d_ab = factor_distance(&a, &b).unwrap();
            let d_ba = factor_distance(&b, &a).unwrap();
            prop_assert!((d_ab - d_ba).abs() < 1e-10);
            let r0 = rotation(th, seed % 2 == 0);
            let b_rot = pair(&b.p * &r0, &b.q * &r0);
            prop_assert!((factor_distance(&a, &b_rot).unwrap() - d_ab).abs() < 1e-10);
        }
    }

    #[test]
    fn relative_error_cases() {
        let mut rng = seeded_rng(4);
        let l = gaussian(5, 5, &mut rng);
        assert_eq!(relative_error(&l, &l).unwrap(), 0.0);
        assert!((relative_error(&(&l * 2.0), &l).unwrap() - 1.0).abs() < 1e-15);
        let e = gaussian(5, 5, &mut rng);
        let e = &e * (1e-3 * l.norm() / e.norm());
        assert!((relative_error(&(&l + e), &l).unwrap() - 1e-3).abs() < 1e-15);
        assert!(matches!(
            relative_error(&l, &DMatrix::zeros(5, 5)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn incoherence_extremes() {
        let u = DMatrix::<f64>::identity(10, 3);
        assert!((incoherence(&u) - 10.0 / 3.0).abs() < 1e-15);
        let ones = DMatrix::from_element(16, 1, 0.25);
        assert!((incoherence(&ones) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn incoherence_random_orthonormal() {
        let mut rng = seeded_rng(5);
        let u = orthonormal(200, 5, &mut rng);
        let mu = incoherence(&u);
        let scan = (0..200)
            .map(|i| (0..5).map(|j| u[(i, j)] * u[(i, j)]).sum::<f64>())
            .fold(0.0, f64::max)
            * 200.0
            / 5.0;
        assert!((mu - scan).abs() < 1e-12);
        assert!((1.0..=40.0).contains(&mu));
    }

    proptest! {
        #[test]
        fn incoherence_at_least_one(seed in any::<u64>(), n in 2usize..30, k in 1usize..6) {
            prop_assume!(k <= n);
            let mut rng = seeded_rng(seed);
            prop_assert!(incoherence(&orthonormal(n, k, &mut rng)) >= 1.0 - 1e-12);
        }

        #[test]
        fn alpha_init_bound_decreasing(kappa in 1.0f64..10.0, r in 1usize..20, mu in 1.0f64..10.0, d in 1usize..30) {
            for case in [IncoherenceCase::CaseI, IncoherenceCase::CaseII, IncoherenceCase::CaseIII] {
                let base = alpha_init_bound(case, kappa, r, mu, mu, d, d);
                prop_assert!(alpha_init_bound(case, kappa * 1.1, r, mu, mu, d, d) < base);
                prop_assert!(alpha_init_bound(case, kappa, r, mu * 1.1, mu * 1.1, d, d) < base);
                match case {
                    IncoherenceCase::CaseII => prop_assert!(alpha_init_bound(case, kappa, r, mu, mu, d + 1, d + 1) < base),
                    _ => prop_assert!(alpha_init_bound(case, kappa, r + 1, mu, mu, d, d) < base),
                }
            }
        }
    }

    #[test]
    fn bound_substitutions() {
        let c1 = IncoherenceCase::CaseI;
        assert!((alpha_init_bound(c1, 1.0, 1, 1.0, 1.0, 3, 3) - 1.0 / 16.0).abs() < 1e-15);
        let (kappa, r, mu1, sigma) = (2.5, 3usize, 1.7, 4.2);
        let a = alpha_init_bound(IncoherenceCase::CaseIII, kappa, r, mu1, 9.0, 5, 5);
        let got = init_distance_bound(IncoherenceCase::CaseIII, a, kappa, r, mu1, 9.0, 5, 5, sigma);
        // 18·(1/(16κrμ1))·rμ1·√(rκσ1) = (9/8)·√(rσ1/κ)
        let hand = 9.0 / 8.0 * (r as f64 * sigma / kappa).sqrt();
        assert!((got - hand).abs() < 1e-12);
        let c2 = alpha_init_bound(IncoherenceCase::CaseII, 2.0, 3, 1.0, 1.5, 7, 7);
        assert!((c2 - 1.0 / (16.0 * 2.0 * 1.5 * 7.0)).abs() < 1e-15);
    }

    #[test]
    fn theory_bounds_from_ground_truth() {
        let mut rng = seeded_rng(6);
        let u = orthonormal(30, 2, &mut rng);
        let v = orthonormal(20, 2, &mut rng);
        let l = &u * DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 2.0])) * v.transpose();
        let x = DenseMatrix::from_matrix(u.clone()).unwrap();
        let y = DenseMatrix::from_matrix(v.clone()).unwrap();
        let features = FeaturePair::new(x, y).unwrap();
        let gt = GroundTruth::new(l, DMatrix::zeros(30, 20), &features, 2).unwrap();
        let b = theory_bounds(&gt, &features, IncoherenceCase::CaseIII);
        assert!((b.kappa - 2.0).abs() < 1e-12);
        assert!((b.mu1 - incoherence(&u).max(incoherence(&v))).abs() < 1e-12);
        assert!((b.alpha_init_bound - 1.0 / (16.0 * 2.0 * 2.0 * b.mu1)).abs() < 1e-15);
        assert!(b.descent_bound_up_to_constant);
        assert!(b.alpha_init_bound <= 1.0 && b.alpha_descent_bound <= 1.0);
        assert!((b.init_distance_bound - b.init_distance_bound_at(b.alpha_init_bound)).abs() < 1e-15);
    }

    #[test]
    fn lemma_equality_cases() {
        let n = 6;
        let a = DMatrix::<f64>::identity(n, n);
        let beta = 1.0 / n as f64;
        assert!((spectral_norm(&a) - beta * n as f64 * max_abs(&a)).abs() < 1e-14);

        let mut rng = seeded_rng(7);
        let (a, b, c, d) = (
            gaussian(5, 2, &mut rng),
            gaussian(4, 2, &mut rng),
            gaussian(5, 2, &mut rng),
            gaussian(4, 2, &mut rng),
        );
        let (x, y) = (DMatrix::<f64>::identity(5, 5), DMatrix::<f64>::identity(4, 4));
        let lhs = factor_distance(&pair(x.tr_mul(&a), y.tr_mul(&b)), &pair(x.tr_mul(&c), y.tr_mul(&d))).unwrap();
        let rhs = factor_distance(&pair(a, b), &pair(c, d)).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn regular_sparse_support() {
        let mut rng = seeded_rng(8);
        let a = random_regular_sparse(9, 4, &mut rng);
        for i in 0..9 {
            assert_eq!(a.row(i).iter().filter(|v| **v != 0.0).count(), 4);
            assert_eq!(a.column(i).iter().filter(|v| **v != 0.0).count(), 4);
        }
    }

    #[test]
    fn lemma_suite_passes() {
        let report = lemma_property_checks(1000, 2024).unwrap();
        assert_eq!(report.sparse_spectral.passed, 1000);
        assert_eq!(report.entry_bound.passed, 1000);
        assert_eq!(report.feature_contraction.passed, 1000);
    }

    #[test]
    fn metric_csv_layout() {
        let rows = vec![MetricRow {
            instance: "a".into(),
            metric: "mu1".into(),
            value: 1.5,
        }];
        let mut buf = Vec::new();
        write_metric_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "instance,metric,value\na,mu1,1.5\n");
    }
}
