//! Dense SVD backed by faer, returning nalgebra types.
//!
//! faer runs single-threaded here (the `rayon` feature is off) so results do
//! not depend on scheduling.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Thin SVD `a = U diag(s) Vᵀ` with `s` non-increasing; `U` is m×k, `V` n×k,
/// `k = min(m, n)`.
pub fn thin_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let svd = to_faer(a)
        .thin_svd()
        .map_err(|e| Error::Degenerate(format!("svd did not converge: {e:?}")))?;
    let s = svd.S().column_vector();
    let sigma = DVector::from_fn(s.nrows(), |i, _| s[i]);
    Ok((from_faer(svd.U()), sigma, from_faer(svd.V())))
}

/// Singular values in non-increasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let s = to_faer(a)
        .singular_values()
        .map_err(|e| Error::Degenerate(format!("svd did not converge: {e:?}")))?;
    Ok(DVector::from_vec(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs() {
        let a = DMatrix::from_fn(7, 4, |i, j| ((i * 3 + j * 5) % 7) as f64 - 2.5 + (i as f64).sin());
        let (u, s, v) = thin_svd(&a).unwrap();
        assert_eq!(u.shape(), (7, 4));
        assert_eq!(v.shape(), (4, 4));
        assert!(s.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let rec = &u * DMatrix::from_diagonal(&s) * v.transpose();
        assert!((rec - &a).norm() < 1e-12 * a.norm());
        assert!((singular_values(&a).unwrap() - s).norm() < 1e-12);
    }
}
