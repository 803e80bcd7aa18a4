//! Tangent-space projections, sampling operators and leverage-weighted norms.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::leverage::LeverageScores;
use crate::matrix::DenseMatrix;
use crate::observation::ObservationSet;
use crate::svd::LowRankFactorization;

/// Tangent space `T = {U Aᵀ + B Vᵀ}` of a factorization, with `U` and `V`
/// held in `faer` form for repeated projections.
pub(crate) struct Tangent {
    u: Mat<f64>,
    v: Mat<f64>,
}

impl Tangent {
    pub(crate) fn new(f: &LowRankFactorization) -> Self {
        Self {
            u: f.u().to_faer(),
            v: f.v().to_faer(),
        }
    }

    /// `UUᵀZ + ZVVᵀ − UUᵀZVVᵀ`
    pub(crate) fn project(&self, z: MatRef<'_, f64>) -> Mat<f64> {
        let utz = self.u.transpose() * z; // r × n2
        let zv = z * &self.v; // n1 × r
        let utzv = &utz * &self.v; // r × r
        // U (UᵀZ) + (ZV − U UᵀZV) Vᵀ
        let left = &self.u * &utz;
        let b = &zv - &self.u * &utzv;
        left + b * self.v.transpose()
    }
}

fn check_shape(f: &LowRankFactorization, z: &DenseMatrix) -> Result<()> {
    if f.shape() != z.shape() {
        return Err(Error::dims(f.shape(), z.shape()));
    }
    Ok(())
}

/// `P_T(Z) = UUᵀZ + ZVVᵀ − UUᵀZVVᵀ`.
pub fn project_t(f: &LowRankFactorization, z: &DenseMatrix) -> Result<DenseMatrix> {
    check_shape(f, z)?;
    let t = Tangent::new(f);
    Ok(DenseMatrix::from_faer(t.project(z.as_faer()).as_ref()))
}

/// `P_{T⊥}(Z) = Z − P_T(Z)`.
pub fn project_t_perp(f: &LowRankFactorization, z: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(z - &project_t(f, z)?)
}

/// `P_Ω(Z)`: keep observed entries of `Z`, zero elsewhere.
pub fn p_omega(obs: &ObservationSet, z: &DenseMatrix) -> Result<DenseMatrix> {
    if obs.shape() != z.shape() {
        return Err(Error::dims(obs.shape(), z.shape()));
    }
    let mut out = DenseMatrix::zeros(z.n_rows(), z.n_cols());
    for (i, j) in obs.indices() {
        out.set(i, j, z.get(i, j));
    }
    Ok(out)
}

fn weighted_restriction(
    obs: &ObservationSet,
    z: &DenseMatrix,
    weight: impl Fn(f64) -> f64,
) -> Result<DenseMatrix> {
    if obs.shape() != z.shape() {
        return Err(Error::dims(obs.shape(), z.shape()));
    }
    let p = obs.probabilities().ok_or_else(|| {
        Error::Contract("R_Ω needs the probabilities the observations were drawn with".into())
    })?;
    let mut out = DenseMatrix::zeros(z.n_rows(), z.n_cols());
    for ((i, j), &pij) in obs.indices().zip(p) {
        out.set(i, j, z.get(i, j) * weight(pij));
    }
    Ok(out)
}

/// `(R_Ω Z)_ij = δ_ij Z_ij / p_ij`.
pub fn r_omega(obs: &ObservationSet, z: &DenseMatrix) -> Result<DenseMatrix> {
    weighted_restriction(obs, z, |p| 1.0 / p)
}

/// `(R_Ω^{1/2} Z)_ij = δ_ij Z_ij / √p_ij`; squares to `R_Ω`.
pub fn r_omega_sqrt(obs: &ObservationSet, z: &DenseMatrix) -> Result<DenseMatrix> {
    weighted_restriction(obs, z, |p| 1.0 / p.sqrt())
}

fn check_scores(z: &DenseMatrix, scores: &LeverageScores) -> Result<()> {
    if scores.shape() != z.shape() {
        return Err(Error::dims(scores.shape(), z.shape()));
    }
    Ok(())
}

/// `‖Z‖_μ(∞) = max_ij |Z_ij| √(n1/(μ_i r)) √(n2/(ν_j r))`.
///
/// A zero entry at a zero score contributes 0; a nonzero one is an error.
pub fn mu_inf_norm(z: &DenseMatrix, scores: &LeverageScores, r: usize) -> Result<f64> {
    check_scores(z, scores)?;
    let (n1, n2) = z.shape();
    let rf = r as f64;
    let mut best = 0.0_f64;
    for (i, &mu) in scores.mu().iter().enumerate() {
        for (j, &nu) in scores.nu().iter().enumerate() {
            let x = z.get(i, j);
            if x == 0.0 {
                continue;
            }
            if mu <= 0.0 || nu <= 0.0 {
                return Err(Error::InfiniteWeight { row: i, col: j });
            }
            let w = (n1 as f64 / (mu * rf)).sqrt() * (n2 as f64 / (nu * rf)).sqrt();
            best = best.max(x.abs() * w);
        }
    }
    Ok(best)
}

/// `‖Z‖_μ(∞,2)`: the largest leverage-weighted row or column norm.
pub fn mu_inf2_norm(z: &DenseMatrix, scores: &LeverageScores, r: usize) -> Result<f64> {
    check_scores(z, scores)?;
    let (n1, n2) = z.shape();
    let rf = r as f64;
    let mut best = 0.0_f64;
    for (i, &mu) in scores.mu().iter().enumerate() {
        let norm2: f64 = z.row(i).iter().map(|x| x * x).sum();
        if norm2 == 0.0 {
            continue;
        }
        if mu <= 0.0 {
            let col = z.row(i).iter().position(|&x| x != 0.0).unwrap_or(0);
            return Err(Error::InfiniteWeight { row: i, col });
        }
        best = best.max((n1 as f64 / (mu * rf) * norm2).sqrt());
    }
    for (j, &nu) in scores.nu().iter().enumerate() {
        let col = z.col(j);
        let norm2: f64 = col.iter().map(|x| x * x).sum();
        if norm2 == 0.0 {
            continue;
        }
        if nu <= 0.0 {
            let row = col.iter().position(|&x| x != 0.0).unwrap_or(0);
            return Err(Error::InfiniteWeight { row, col: j });
        }
        best = best.max((n2 as f64 / (nu * rf) * norm2).sqrt());
    }
    Ok(best)
}
