use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Dense real matrix with finite entries and positive dimensions.
///
/// Storage is delegated to [`nalgebra::DMatrix`]; the row-major view used by
/// the file formats is produced on demand.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(DMatrix<f64>);

impl DenseMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        check_dims(rows, cols)?;
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_slice(rows, cols, entries))
    }

    /// Wraps an nalgebra matrix, rejecting empty shapes and non-finite entries.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        check_dims(m.nrows(), m.ncols())?;
        check_finite(&m)?;
        Ok(Self(m))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "matrix dimensions must be positive");
        Self(DMatrix::identity(n, n))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.0.len());
        for i in 0..self.rows() {
            out.extend(self.0.row(i).iter().copied());
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    /// Multiplies every entry by `c`; `c` must be finite.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_matrix(&self.0 * c)
    }
}

impl From<DenseMatrix> for DMatrix<f64> {
    fn from(m: DenseMatrix) -> Self {
        m.0
    }
}

fn check_dims(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!(
            "matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    Ok(())
}

pub(crate) fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    crate::linalg::singular_values(m).map_or(f64::NAN, |s| s[0])
}

/// Largest row ℓ2 norm, ‖A‖_{2,∞}.
pub fn max_row_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).norm())
        .fold(0.0, f64::max)
}

/// Largest absolute entry, ‖A‖_∞ of the vectorized matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Orthonormal basis of the column space of `a` with the same column count.
///
/// Householder QR with the sign of each column chosen so that the diagonal of
/// `R` is positive; an already orthonormal input is returned (up to rounding)
/// unchanged.
pub fn orthonormalize(a: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, k) = a.shape();
    if k > n {
        return Err(Error::Rank(format!(
            "cannot orthonormalize {k} columns in dimension {n}"
        )));
    }
    let qr = a.as_matrix().clone().qr();
    let r = qr.r();
    let mut q = qr.q();
    let scale = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    for j in 0..k {
        let rjj = r[(j, j)];
        if scale == 0.0 || rjj.abs() <= 1e-12 * scale {
            return Err(Error::Rank(format!(
                "input is rank deficient (column {j} is dependent)"
            )));
        }
        if rjj < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    DenseMatrix::from_matrix(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
        DenseMatrix::from_matrix(m).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            DenseMatrix::from_row_major(1, 2, &[1.0, f64::NAN]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(matches!(
            DenseMatrix::from_row_major(0, 2, &[]),
            Err(Error::Dimension(_))
        ));
        assert!(DenseMatrix::from_row_major(2, 2, &[1.0; 3]).is_err());
    }

    #[test]
    fn row_major_layout() {
        let m = DenseMatrix::from_row_major(2, 3, &[1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(m.get(0, 2), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.to_row_major(), vec![1., 2., 3., 4., 5., 6.]);
    }

    #[test]
    fn orthonormalize_identity_is_identity() {
        let b = orthonormalize(&DenseMatrix::identity(4)).unwrap();
        assert!((b.as_matrix() - DMatrix::<f64>::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn orthonormalize_removes_scaling() {
        let a = DenseMatrix::from_row_major(3, 2, &[2., 0., 0., 3., 0., 0.]).unwrap();
        let b = orthonormalize(&a).unwrap();
        let expected = DMatrix::from_row_slice(3, 2, &[1., 0., 0., 1., 0., 0.]);
        assert!((b.as_matrix() - expected).norm() < 1e-15);
    }

    #[test]
    fn orthonormalize_random_spans_input() {
        let a = gaussian(10, 4, 11);
        let b = orthonormalize(&a).unwrap();
        let bm = b.as_matrix();
        let gram = bm.transpose() * bm;
        assert!((gram - DMatrix::<f64>::identity(4, 4)).norm() < 1e-12);
        let reproj = bm * (bm.transpose() * a.as_matrix());
        assert!((reproj - a.as_matrix()).norm() < 1e-10);
    }

    #[test]
    fn orthonormalize_is_idempotent() {
        let b = orthonormalize(&gaussian(12, 5, 3)).unwrap();
        let bb = orthonormalize(&b).unwrap();
        for j in 0..5 {
            let c1 = b.as_matrix().column(j);
            let c2 = bb.as_matrix().column(j);
            let diff = (c1 - c2).norm().min((c1 + c2).norm());
            assert!(diff < 1e-12);
        }
    }

    #[test]
    fn orthonormalize_rejects_rank_deficient() {
        let a = DenseMatrix::from_row_major(3, 2, &[1., 2., 2., 4., 3., 6.]).unwrap();
        assert!(matches!(orthonormalize(&a), Err(Error::Rank(_))));
        let wide = gaussian(2, 3, 1);
        assert!(matches!(orthonormalize(&wide), Err(Error::Rank(_))));
    }

    #[test]
    fn norms() {
        let m = DMatrix::from_row_slice(2, 2, &[3., 4., 0., -1.]);
        assert_eq!(max_row_norm(&m), 5.0);
        assert_eq!(max_abs(&m), 4.0);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0]));
        assert!((spectral_norm(&d) - 3.0).abs() < 1e-14);
    }
}
