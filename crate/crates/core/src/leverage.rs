//! Leverage scores and the sampling distributions built from them.
//!
//! Normalized scores are `μ_i = (n1/r)‖Uᵀe_i‖²` and `ν_j = (n2/r)‖Vᵀe_j‖²`,
//! so `Σ_i μ_i = n1` and `Σ_j ν_j = n2`. Every distribution here is a pure
//! function of its inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::svd::LowRankFactorization;

/// Absolute tolerance on the normalization identities `(r/n)Σμ = r`.
pub const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct LeverageScores {
    mu: Vec<f64>,
    nu: Vec<f64>,
    rank: usize,
}

impl LeverageScores {
    /// Validates nonnegativity, the upper bounds `n/r`, and both normalizations.
    pub fn new(mu: Vec<f64>, nu: Vec<f64>, rank: usize) -> Result<Self> {
        if rank == 0 || mu.is_empty() || nu.is_empty() {
            return Err(Error::Contract("scores need positive rank and dimensions".into()));
        }
        for (name, s) in [("mu", &mu), ("nu", &nu)] {
            let n = s.len() as f64;
            let r = rank as f64;
            if let Some(bad) = s.iter().find(|&&x| !(x >= 0.0) || x > n / r * (1.0 + 1e-9)) {
                return Err(Error::Contract(format!(
                    "{name} score {bad} outside [0, {}]",
                    n / r
                )));
            }
            let total = r / n * s.iter().sum::<f64>();
            if (total - r).abs() > NORMALIZATION_TOL * r.max(1.0) {
                return Err(Error::Contract(format!(
                    "{name} normalization (r/n)Σ = {total}, expected {r}"
                )));
            }
        }
        Ok(Self { mu, nu, rank })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.mu.len(), self.nu.len())
    }

    /// The incoherence parameter `μ₀ = max_{i,j} {μ_i, ν_j}`.
    pub fn mu0(&self) -> f64 {
        self.mu
            .iter()
            .chain(&self.nu)
            .fold(0.0_f64, |m, &x| m.max(x))
    }
}

/// Per-entry observation probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMatrix {
    n_rows: usize,
    n_cols: usize,
    p: Vec<f64>,
}

impl ProbabilityMatrix {
    pub fn new(n_rows: usize, n_cols: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != n_rows * n_cols {
            return Err(Error::Dimension {
                expected: format!("{} probabilities", n_rows * n_cols),
                got: format!("{}", p.len()),
            });
        }
        if let Some(k) = p.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::Contract(format!(
                "probability {} at ({}, {}) outside [0, 1]",
                p[k],
                k / n_cols,
                k % n_cols
            )));
        }
        Ok(Self { n_rows, n_cols, p })
    }

    pub fn constant(n_rows: usize, n_cols: usize, p: f64) -> Result<Self> {
        Self::new(n_rows, n_cols, vec![p; n_rows * n_cols])
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(n_rows, n_cols, DenseMatrix::from_fn(n_rows, n_cols, f).into_values())
    }

    /// Product form `p_ij = p_row[i] · p_col[j]`.
    pub fn product(p_row: &[f64], p_col: &[f64]) -> Result<Self> {
        Self::from_fn(p_row.len(), p_col.len(), |i, j| p_row[i] * p_col[j])
    }

    pub fn from_dense(m: &DenseMatrix) -> Result<Self> {
        Self::new(m.n_rows(), m.n_cols(), m.values().to_vec())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n_cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    /// Expected sample count `Σ p_ij`.
    pub fn expected_count(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n_rows, self.n_cols, |i, j| self.get(i, j))
    }
}

/// A normalized sampling distribution over matrix entries, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EntryWeights {
    shape: (usize, usize),
    weights: Vec<f64>,
    budget: Option<usize>,
}

impl EntryWeights {
    /// Normalizes nonnegative raw weights to sum one.
    pub fn from_raw(shape: (usize, usize), raw: Vec<f64>) -> Result<Self> {
        if raw.len() != shape.0 * shape.1 {
            return Err(Error::dims(shape, (raw.len(), 1)));
        }
        if raw.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Contract("weights must be finite and nonnegative".into()));
        }
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Degenerate("all entry weights are zero".into()));
        }
        Ok(Self {
            shape,
            weights: raw.into_iter().map(|w| w / total).collect(),
            budget: None,
        })
    }

    pub fn uniform(n_rows: usize, n_cols: usize) -> Self {
        let k = n_rows * n_cols;
        Self {
            shape: (n_rows, n_cols),
            weights: vec![1.0 / k as f64; k],
            budget: None,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.shape.1 + j]
    }

    pub fn budget(&self) -> Option<usize> {
        self.budget
    }
}

/// Normalized leverage scores of a factorization.
pub fn leverage_scores(f: &LowRankFactorization) -> LeverageScores {
    let (n1, n2) = f.shape();
    let r = f.rank();
    let row_norms = |m: &DenseMatrix, n: usize| -> Vec<f64> {
        (0..m.n_rows())
            .map(|i| n as f64 / r as f64 * m.row(i).iter().map(|x| x * x).sum::<f64>())
            .collect()
    };
    LeverageScores {
        mu: row_norms(f.u(), n1),
        nu: row_norms(f.v(), n2),
        rank: r,
    }
}

/// Joint incoherence `μ_str = ‖UVᵀ‖_∞² · n1 n2 / r`.
///
/// For square matrices this is the `μ_str` defined by
/// `‖UVᵀ‖_∞ = √(r μ_str / n²)`.
pub fn joint_incoherence(f: &LowRankFactorization) -> f64 {
    let (n1, n2) = f.shape();
    let max = f.uvt().max_abs();
    max * max * (n1 * n2) as f64 / f.rank() as f64
}

/// Leveraged sampling with constant `c0`:
/// `p_ij = max(min(c0 (μ_i + ν_j) r log²(n1+n2) / min(n1,n2), 1), min(n1,n2)^-10)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeveragedSampling {
    pub c0: f64,
}

impl LeveragedSampling {
    pub fn new(c0: f64) -> Result<Self> {
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(Error::Contract(format!("c0 must be positive, got {c0}")));
        }
        Ok(Self { c0 })
    }

    /// The `c0` whose uncapped expected count equals `10 n log n` on square
    /// incoherent instances; extended to `n = max(n1, n2)` otherwise.
    pub fn calibrated(n1: usize, n2: usize, r: usize) -> Self {
        let n = n1.max(n2) as f64;
        let log_sum = ((n1 + n2) as f64).ln();
        Self {
            c0: 5.0 * n.ln() / (r as f64 * log_sum * log_sum),
        }
    }

    /// Per-entry scale `r log²(n1+n2) / min(n1, n2)` multiplying `c0 (μ_i + ν_j)`.
    pub fn scale(n1: usize, n2: usize, r: usize) -> f64 {
        let log_sum = ((n1 + n2) as f64).ln();
        r as f64 * log_sum * log_sum / n1.min(n2) as f64
    }

    /// Floor `min(n1, n2)^-10`.
    pub fn floor(n1: usize, n2: usize) -> f64 {
        (n1.min(n2) as f64).powi(-10)
    }

    /// Raw `c0 (μ_i + ν_j) r log²(n1+n2) / min(n1,n2)` before capping, row-major.
    pub fn uncapped(&self, scores: &LeverageScores) -> Vec<f64> {
        let (n1, n2) = scores.shape();
        let k = self.c0 * Self::scale(n1, n2, scores.rank());
        let mut out = Vec::with_capacity(n1 * n2);
        for &mu in scores.mu() {
            for &nu in scores.nu() {
                out.push(k * (mu + nu));
            }
        }
        out
    }

    pub fn distribution(&self, scores: &LeverageScores) -> ProbabilityMatrix {
        let (n1, n2) = scores.shape();
        let floor = Self::floor(n1, n2);
        let p = self
            .uncapped(scores)
            .into_iter()
            .map(|x| x.min(1.0).max(floor))
            .collect();
        ProbabilityMatrix {
            n_rows: n1,
            n_cols: n2,
            p,
        }
    }

    /// The `c0` whose capped distribution has expected count `budget`.
    ///
    /// Solved by bisection on the monotone map `c0 ↦ Σ p_ij`.
    pub fn for_expected_count(scores: &LeverageScores, budget: f64) -> Result<Self> {
        let (n1, n2) = scores.shape();
        let total = (n1 * n2) as f64;
        if !(budget > 0.0) || budget > total {
            return Err(Error::InfeasibleBudget {
                requested: budget.ceil() as usize,
                available: n1 * n2,
            });
        }
        let count = |c0: f64| LeveragedSampling { c0 }.distribution(scores).expected_count();
        let mut lo = 0.0;
        let mut hi = 1.0;
        while count(hi) < budget {
            hi *= 2.0;
            if hi > 1e12 {
                // Entries with μ_i + ν_j = 0 stay at the floor forever.
                return Err(Error::InfeasibleBudget {
                    requested: budget.ceil() as usize,
                    available: n1 * n2,
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count(mid) < budget {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        Ok(LeveragedSampling { c0: hi })
    }
}

/// Leveraged sampling probabilities for constant `c0`.
pub fn leveraged_distribution(scores: &LeverageScores, c0: f64) -> Result<ProbabilityMatrix> {
    Ok(LeveragedSampling::new(c0)?.distribution(scores))
}

/// Phase-two weights `p̃_ij ∝ μ̃_i + ν̃_j`, normalized.
///
/// The constant `r log²(2n)/n` cancels in the normalization. Entries whose
/// row and column scores are both zero get weight zero.
pub fn estimated_distribution(scores: &LeverageScores, budget: usize) -> Result<EntryWeights> {
    let (n1, n2) = scores.shape();
    let mut raw = Vec::with_capacity(n1 * n2);
    for &mu in scores.mu() {
        for &nu in scores.nu() {
            raw.push(mu + nu);
        }
    }
    Ok(EntryWeights::from_raw((n1, n2), raw)?.with_budget(budget))
}

/// Location-invariant comparison schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComparisonKind {
    Uniform,
    /// `p̃_ij ∝ |M̃_ij|`
    L1,
    /// `p̃_ij ∝ M̃_ij²`
    L2,
}

pub fn comparison_distribution(kind: ComparisonKind, m_est: &DenseMatrix) -> Result<EntryWeights> {
    let (n1, n2) = m_est.shape();
    match kind {
        ComparisonKind::Uniform => Ok(EntryWeights::uniform(n1, n2)),
        ComparisonKind::L1 => EntryWeights::from_raw((n1, n2), m_est.map(f64::abs).into_values()),
        ComparisonKind::L2 => EntryWeights::from_raw((n1, n2), m_est.map(|x| x * x).into_values()),
    }
}
