//! Rank-r SVD facade over the `faer` dense SVD.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Singular values below `RELATIVE_FLOOR * σ₁` are treated as zero.
pub const RELATIVE_FLOOR: f64 = 1e-12;

/// Orthonormality tolerance for `Uᵀ U − I` and `Vᵀ V − I` in Frobenius norm.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// A rank-r SVD triple `U Σ Vᵀ`.
#[derive(Clone, Debug)]
pub struct LowRankFactorization {
    u: DenseMatrix,
    s: Vec<f64>,
    v: DenseMatrix,
}

impl LowRankFactorization {
    /// Validates orthonormal columns and strictly positive nonincreasing values.
    pub fn new(u: DenseMatrix, s: Vec<f64>, v: DenseMatrix) -> Result<Self> {
        let r = s.len();
        if r == 0 || u.n_cols() != r || v.n_cols() != r {
            return Err(Error::Dimension {
                expected: format!("U and V with {r} columns"),
                got: format!("U {}x{}, V {}x{}", u.n_rows(), u.n_cols(), v.n_rows(), v.n_cols()),
            });
        }
        for (name, m) in [("U", &u), ("V", &v)] {
            let dev = gram_deviation(m);
            if dev > ORTHONORMAL_TOL {
                return Err(Error::Contract(format!(
                    "{name} columns are not orthonormal (‖{name}ᵀ{name} − I‖_F = {dev:.3e})"
                )));
            }
        }
        if s.iter().any(|&x| !(x > 0.0)) || s.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Contract(
                "singular values must be strictly positive and nonincreasing".into(),
            ));
        }
        Ok(Self { u, s, v })
    }

    /// Unit singular values: the factorization of `U Vᵀ`.
    pub fn from_subspaces(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        let r = u.n_cols();
        Self::new(u, vec![1.0; r], v)
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Shape `(n1, n2)` of the factorized matrix.
    pub fn shape(&self) -> (usize, usize) {
        (self.u.n_rows(), self.v.n_rows())
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    /// `U Σ Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let us = DenseMatrix::from_fn(self.u.n_rows(), self.rank(), |i, k| {
            self.u.get(i, k) * self.s[k]
        });
        &us * &self.v.transpose()
    }

    /// `U Vᵀ`, the sign pattern of the tangent space.
    pub fn uvt(&self) -> DenseMatrix {
        &self.u * &self.v.transpose()
    }
}

fn gram_deviation(m: &DenseMatrix) -> f64 {
    let g = m.as_faer().transpose() * m.as_faer();
    let mut acc = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            acc += (g[(i, j)] - target).powi(2);
        }
    }
    acc.sqrt()
}

/// Full thin SVD `(U, σ, V)` with all `min(n1, n2)` triplets.
pub fn full_svd(m: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    let svd = m
        .as_faer()
        .thin_svd()
        .map_err(|_| Error::Convergence { iterations: 0 })?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    Ok((
        DenseMatrix::from_faer(svd.U()),
        s,
        DenseMatrix::from_faer(svd.V()),
    ))
}

/// Best rank-`r` approximation as an SVD triple.
///
/// Triplets whose singular value falls below `RELATIVE_FLOOR · σ₁` are
/// dropped, so the returned rank can be smaller than `r` on rank-deficient
/// input. Ties at the cut keep the first `r` in sorted order.
pub fn svd_rank_r(m: &DenseMatrix, r: usize) -> Result<LowRankFactorization> {
    let (n1, n2) = m.shape();
    if r == 0 || r > n1.min(n2) {
        return Err(Error::RankTooLarge {
            rank: r,
            n_rows: n1,
            n_cols: n2,
        });
    }
    let (u, s, v) = full_svd(m)?;
    let floor = RELATIVE_FLOOR * s[0];
    let kept = s.iter().take(r).take_while(|&&x| x > floor && x > 0.0).count();
    if kept == 0 {
        return Err(Error::Degenerate("matrix is numerically zero".into()));
    }
    let u = DenseMatrix::from_fn(n1, kept, |i, k| u.get(i, k));
    let v = DenseMatrix::from_fn(n2, kept, |j, k| v.get(j, k));
    Ok(LowRankFactorization {
        u,
        s: s[..kept].to_vec(),
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rank_three() {
        let f = svd_rank_r(&DenseMatrix::identity(3), 3).unwrap();
        for s in f.singular_values() {
            assert!((s - 1.0).abs() < 1e-14);
        }
        let err = (&f.reconstruct() - &DenseMatrix::identity(3)).frobenius_norm();
        assert!(err < 1e-14);
    }

    #[test]
    fn canonical_rank_one() {
        let m = DenseMatrix::outer(&[1.0, 0.0], &[1.0, 0.0]);
        let f = svd_rank_r(&m, 1).unwrap();
        assert!((f.singular_values()[0] - 1.0).abs() < 1e-14);
        // Singular vectors are determined up to a joint sign.
        let sign = f.u().get(0, 0).signum();
        assert!((f.u().get(0, 0) * sign - 1.0).abs() < 1e-14);
        assert!((f.v().get(0, 0) * sign - 1.0).abs() < 1e-14);
        assert!(f.u().get(1, 0).abs() < 1e-14);
    }

    #[test]
    fn rank_errors() {
        let m = DenseMatrix::identity(3);
        assert!(matches!(svd_rank_r(&m, 4), Err(Error::RankTooLarge { .. })));
        assert!(matches!(svd_rank_r(&m, 0), Err(Error::RankTooLarge { .. })));
        assert!(matches!(
            svd_rank_r(&DenseMatrix::zeros(3, 3), 1),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn deficient_rank_is_truncated() {
        let m = DenseMatrix::outer(&[1.0, 2.0, 3.0], &[1.0, -1.0, 0.5]);
        let f = svd_rank_r(&m, 3).unwrap();
        assert_eq!(f.rank(), 1);
    }

    #[test]
    fn factorization_validation() {
        let u = DenseMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let v = DenseMatrix::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        assert!(LowRankFactorization::from_subspaces(u, v.clone()).is_err());
        assert!(LowRankFactorization::new(v.clone(), vec![-1.0], v).is_err());
    }
}
