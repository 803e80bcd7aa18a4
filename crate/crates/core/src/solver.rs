//! Equality-constrained nuclear-norm minimization
//!
//! ```text
//! min ‖X‖_*  s.t.  X_ij = M_ij, (i,j) ∈ Ω
//! ```
//!
//! solved by inexact augmented Lagrangian iterations. With `Y` the dual
//! variable (supported on Ω) and `ρ` the penalty:
//!
//! ```text
//! X ← svt(X + P_Ω(M − X) + Y/ρ, 1/ρ)      (primal, unobserved entries keep X)
//! Y ← Y + ρ P_Ω(M − X)                     (dual)
//! ρ ← growth · ρ
//! ```
//!
//! The weighted variant `min ‖R X C‖_*` reduces to the unweighted problem
//! on `R M C` followed by unscaling.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::observation::ObservationSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_outer_iterations: usize,
    /// Initial penalty; `None` means `1 / ‖P_Ω(M)‖₂`.
    pub penalty_initial: Option<f64>,
    pub penalty_growth: f64,
    pub relative_residual_tolerance: f64,
    /// Upper bound on the rank of every iterate, when the caller asserts one.
    pub svd_rank_cap: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iterations: 500,
            penalty_initial: None,
            penalty_growth: 1.05,
            relative_residual_tolerance: 1e-7,
            svd_rank_cap: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.relative_residual_tolerance > 0.0) {
            return Err(Error::Contract("tolerance must be positive".into()));
        }
        if !(self.penalty_growth > 1.0) {
            return Err(Error::Contract("penalty growth must exceed 1".into()));
        }
        if matches!(self.penalty_initial, Some(p) if !(p > 0.0)) {
            return Err(Error::Contract("initial penalty must be positive".into()));
        }
        if self.max_outer_iterations == 0 {
            return Err(Error::Contract("need at least one iteration".into()));
        }
        if self.svd_rank_cap == Some(0) {
            return Err(Error::Contract("svd rank cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub x_hat: DenseMatrix,
    pub iterations: usize,
    /// `‖P_Ω(X̂ − M)‖_F / max(1, ‖P_Ω(M)‖_F)`
    pub final_constraint_residual: f64,
    pub nuclear_norm_value: f64,
    pub converged: bool,
    /// Nuclear norm of each primal iterate.
    pub nuclear_norm_trace: Vec<f64>,
}

impl SolveReport {
    /// `‖X̂ − M‖_F / ‖M‖_F`.
    pub fn relative_error(&self, truth: &DenseMatrix) -> Result<f64> {
        let diff = self.x_hat.try_sub(truth)?;
        Ok(diff.frobenius_norm() / truth.frobenius_norm().max(f64::MIN_POSITIVE))
    }
}

/// Diagonal weights `R = diag(row)`, `C = diag(col)`, strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrices {
    row: Vec<f64>,
    col: Vec<f64>,
}

impl WeightMatrices {
    pub fn new(row: Vec<f64>, col: Vec<f64>) -> Result<Self> {
        if let Some(w) = row.iter().chain(&col).find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::Contract(format!("weights must be positive, found {w}")));
        }
        Ok(Self { row, col })
    }

    pub fn identity(n1: usize, n2: usize) -> Self {
        Self {
            row: vec![1.0; n1],
            col: vec![1.0; n2],
        }
    }

    pub fn row(&self) -> &[f64] {
        &self.row
    }

    pub fn col(&self) -> &[f64] {
        &self.col
    }

    /// `R Z C`
    pub fn scale(&self, z: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(z.n_rows(), z.n_cols(), |i, j| self.row[i] * z.get(i, j) * self.col[j])
    }

    /// `R⁻¹ Z C⁻¹`
    pub fn unscale(&self, z: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(z.n_rows(), z.n_cols(), |i, j| z.get(i, j) / (self.row[i] * self.col[j]))
    }
}

/// Singular value soft-thresholding `U max(Σ − τ, 0) Vᵀ`.
pub fn svt(m: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if !(tau >= 0.0) {
        return Err(Error::Contract(format!("threshold must be nonnegative, got {tau}")));
    }
    let (x, _) = shrink(m.as_faer(), tau, None)?;
    Ok(DenseMatrix::from_faer(x.as_ref()))
}

/// Thresholds `z` and returns the result with its nuclear norm.
fn shrink(z: MatRef<'_, f64>, tau: f64, rank_cap: Option<usize>) -> Result<(Mat<f64>, f64)> {
    let svd = z
        .thin_svd()
        .map_err(|_| Error::Convergence { iterations: 0 })?;
    let s = svd.S().column_vector();
    let mut kept = s.iter().take_while(|&&x| x > tau).count();
    if let Some(cap) = rank_cap {
        kept = kept.min(cap);
    }
    let (n1, n2) = (z.nrows(), z.ncols());
    if kept == 0 {
        return Ok((Mat::zeros(n1, n2), 0.0));
    }
    let u = svd.U().get(.., ..kept);
    let v = svd.V().get(.., ..kept);
    let shrunk: Vec<f64> = s.iter().take(kept).map(|x| x - tau).collect();
    let us = Mat::from_fn(n1, kept, |i, k| u[(i, k)] * shrunk[k]);
    Ok((us * v.transpose(), shrunk.iter().sum()))
}

/// Unweighted nuclear-norm completion of the observed entries.
///
/// Hitting the iteration cap is reported through `converged = false`.
pub fn complete_nuclear(obs: &ObservationSet, config: &SolverConfig) -> Result<SolveReport> {
    config.validate()?;
    if obs.is_empty() {
        return Err(Error::Contract("cannot complete from an empty observation set".into()));
    }
    let (n1, n2) = obs.shape();
    let idx: Vec<(usize, usize)> = obs.indices().collect();
    let vals: Vec<f64> = obs.entries().iter().map(|e| e.value).collect();

    let obs_norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
    let denom = obs_norm.max(1.0);
    let d = obs.to_dense().to_faer();
    let spectral = d
        .as_ref()
        .singular_values()
        .map_err(|_| Error::Convergence { iterations: 0 })?
        .first()
        .copied()
        .unwrap_or(0.0);
    if spectral == 0.0 {
        // All observed values are zero: the zero matrix is optimal.
        return Ok(SolveReport {
            x_hat: DenseMatrix::zeros(n1, n2),
            iterations: 0,
            final_constraint_residual: 0.0,
            nuclear_norm_value: 0.0,
            converged: true,
            nuclear_norm_trace: Vec::new(),
        });
    }

    let mut penalty = config.penalty_initial.unwrap_or(1.0 / spectral);
    let mut dual = vec![0.0; idx.len()];
    let mut x = Mat::<f64>::zeros(n1, n2);
    let mut trace = Vec::new();
    let mut residual = f64::INFINITY;
    let mut nuclear = 0.0;
    let mut iterations = 0;

    while iterations < config.max_outer_iterations {
        iterations += 1;
        let mut g = x.clone();
        for (k, &(i, j)) in idx.iter().enumerate() {
            g[(i, j)] = vals[k] + dual[k] / penalty;
        }
        let (next, norm) = shrink(g.as_ref(), 1.0 / penalty, config.svd_rank_cap)?;
        x = next;
        nuclear = norm;
        trace.push(norm);

        let mut sq = 0.0;
        for (k, &(i, j)) in idx.iter().enumerate() {
            let gap = vals[k] - x[(i, j)];
            dual[k] += penalty * gap;
            sq += gap * gap;
        }
        residual = sq.sqrt() / denom;
        if residual <= config.relative_residual_tolerance {
            break;
        }
        penalty *= config.penalty_growth;
    }

    if x.col_iter().flat_map(|c| c.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Convergence { iterations });
    }
    Ok(SolveReport {
        x_hat: DenseMatrix::from_faer(x.as_ref()),
        iterations,
        final_constraint_residual: residual,
        nuclear_norm_value: nuclear,
        converged: residual <= config.relative_residual_tolerance,
        nuclear_norm_trace: trace,
    })
}

/// Weighted completion `min ‖R X C‖_*` via scale, solve, unscale.
pub fn complete_weighted(
    obs: &ObservationSet,
    weights: &WeightMatrices,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let (n1, n2) = obs.shape();
    if weights.row.len() != n1 || weights.col.len() != n2 {
        return Err(Error::dims((n1, n2), (weights.row.len(), weights.col.len())));
    }
    let scaled = obs.map_values(|i, j, v| weights.row[i] * v * weights.col[j])?;
    let mut report = complete_nuclear(&scaled, config)?;
    report.x_hat = weights.unscale(&report.x_hat);
    let mut sq = 0.0;
    let mut obs_sq = 0.0;
    for e in obs.entries() {
        sq += (report.x_hat.get(e.row, e.col) - e.value).powi(2);
        obs_sq += e.value * e.value;
    }
    report.final_constraint_residual = sq.sqrt() / obs_sq.sqrt().max(1.0);
    Ok(report)
}

/// Weights for product-form sampling `p_ij = p_i^r p_j^c`:
/// `R_i = √(p_i^r · mean(p^c))`, `C_j = √(p_j^c · mean(p^r))`.
pub fn choose_weights(p_row: &[f64], p_col: &[f64]) -> Result<WeightMatrices> {
    if p_row.is_empty() || p_col.is_empty() {
        return Err(Error::Contract("marginals must be nonempty".into()));
    }
    if let Some(p) = p_row.iter().chain(p_col).find(|p| !(**p > 0.0)) {
        return Err(Error::Contract(format!("marginal probabilities must be positive, found {p}")));
    }
    let mean_row = p_row.iter().sum::<f64>() / p_row.len() as f64;
    let mean_col = p_col.iter().sum::<f64>() / p_col.len() as f64;
    WeightMatrices::new(
        p_row.iter().map(|p| (p * mean_col).sqrt()).collect(),
        p_col.iter().map(|p| (p * mean_row).sqrt()).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svt_edge_cases() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![-0.5, 3.0]]).unwrap();
        let same = svt(&m, 0.0).unwrap();
        assert!((&same - &m).frobenius_norm() < 1e-12);
        let s1 = m.spectral_norm().unwrap();
        assert_eq!(svt(&m, s1).unwrap(), DenseMatrix::zeros(2, 2));
        let d = svt(&DenseMatrix::diag(&[3.0, 1.0]), 2.0).unwrap();
        assert!((&d - &DenseMatrix::diag(&[1.0, 0.0])).frobenius_norm() < 1e-12);
        assert!(svt(&m, -1.0).is_err());
    }

    #[test]
    fn full_observation_recovers_exactly() {
        let m = DenseMatrix::from_fn(6, 5, |i, j| (i as f64 + 1.0) * (j as f64 - 2.0) + 0.1 * (i * j) as f64);
        let report = complete_nuclear(&ObservationSet::full(&m), &SolverConfig::default()).unwrap();
        assert!(report.converged);
        assert!(report.relative_error(&m).unwrap() <= 1e-8);
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            penalty_growth: 1.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let obs = ObservationSet::empty((2, 2));
        assert!(complete_nuclear(&obs, &SolverConfig::default()).is_err());
    }

    #[test]
    fn weights_reject_nonpositive() {
        assert!(WeightMatrices::new(vec![1.0, 0.0], vec![1.0]).is_err());
        assert!(choose_weights(&[0.1, 0.0], &[0.5]).is_err());
    }

    #[test]
    fn chosen_weights_for_uniform_columns() {
        let w = choose_weights(&[0.1, 0.2, 0.3, 0.4], &[0.25; 4]).unwrap();
        let expected = [0.1581, 0.2236, 0.2739, 0.3162];
        for (got, want) in w.row().iter().zip(expected) {
            assert!((got - want).abs() < 5e-5, "{got} vs {want}");
        }
    }
}
