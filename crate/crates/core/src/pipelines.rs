//! End-to-end procedures that choose their own samples: two-phase
//! estimated-leverage sampling, and the row-coherent procedure that reads
//! whole rows to learn the row space before leveraged sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leverage::{
    comparison_distribution, estimated_distribution, leverage_scores, ComparisonKind, EntryWeights,
    LeverageScores, LeveragedSampling, ProbabilityMatrix,
};
use crate::matrix::DenseMatrix;
use crate::observation::ObservationSet;
use crate::sampling::{bernoulli_sample, sample_full_rows, sample_uniform, sample_without_replacement, RandomStream};
use crate::solver::{complete_nuclear, SolveReport, SolverConfig};
use crate::svd::svd_rank_r;

/// Substream tags. The uniform scheme of the harness reuses `PHASE_ONE` so
/// that `beta = 1` and uniform sampling draw the same sets.
pub const PHASE_ONE: u64 = 1;
pub const PHASE_TWO: u64 = 2;
const ROWS: u64 = 3;
const ENTRIES: u64 = 4;

/// Second-phase weights.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseTwo {
    /// `∝ μ̃_i + ν̃_j`
    #[default]
    Estimated,
    /// `∝ |M̃_ij|`
    L1,
    /// `∝ M̃_ij²`
    L2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseConfig {
    pub rank_parameter: usize,
    pub budget: usize,
    pub beta: f64,
    #[serde(default)]
    pub phase_two: PhaseTwo,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl TwoPhaseConfig {
    pub fn new(rank_parameter: usize, budget: usize, beta: f64) -> Self {
        Self {
            rank_parameter,
            budget,
            beta,
            phase_two: PhaseTwo::Estimated,
            solver: SolverConfig::default(),
        }
    }

    /// `⌊β m⌋`.
    pub fn phase_one_count(&self) -> usize {
        // Guard against β m landing a hair below an integer.
        ((self.beta * self.budget as f64) + 1e-9).floor() as usize
    }
}

/// Samples drawn by [`two_phase_sample`] and what phase one learned.
#[derive(Clone, Debug)]
pub struct TwoPhaseSample {
    pub phase_one: ObservationSet,
    pub phase_two: ObservationSet,
    /// Scores of the rank-`r` approximation of `P_Ω(M)`; `None` when phase
    /// one saw only zeros.
    pub estimated_scores: Option<LeverageScores>,
    /// `r` minus the number of singular triplets phase one produced.
    pub rank_deficiency: usize,
}

impl TwoPhaseSample {
    pub fn union(&self) -> Result<ObservationSet> {
        self.phase_one.union(&self.phase_two)
    }
}

#[derive(Clone, Debug)]
pub struct TwoPhaseOutcome {
    pub sample: TwoPhaseSample,
    pub report: SolveReport,
}

/// Draws both phases without solving.
pub fn two_phase_sample(m: &DenseMatrix, cfg: &TwoPhaseConfig, rng: &RandomStream) -> Result<TwoPhaseSample> {
    let (n1, n2) = m.shape();
    let r = cfg.rank_parameter;
    if !(0.0..=1.0).contains(&cfg.beta) {
        return Err(Error::Contract(format!("beta {} outside [0, 1]", cfg.beta)));
    }
    if r == 0 || r > n1.min(n2) {
        return Err(Error::RankTooLarge { rank: r, n_rows: n1, n_cols: n2 });
    }
    if cfg.budget > n1 * n2 {
        return Err(Error::InfeasibleBudget { requested: cfg.budget, available: n1 * n2 });
    }
    let first = cfg.phase_one_count();
    let phase_one = sample_uniform(m, first, &rng.derive(PHASE_ONE))?;

    let (estimate, scores, rank_deficiency) = match svd_rank_r(&phase_one.to_dense(), r) {
        Ok(f) => {
            let deficiency = r - f.rank();
            (Some(f.reconstruct()), Some(leverage_scores(&f)), deficiency)
        }
        Err(Error::Degenerate(_)) => (None, None, r),
        Err(e) => return Err(e),
    };

    let second = cfg.budget - first;
    let weights = match (&scores, &estimate, cfg.phase_two) {
        (Some(s), _, PhaseTwo::Estimated) => estimated_distribution(s, second)?,
        (_, Some(est), PhaseTwo::L1) => comparison_distribution(ComparisonKind::L1, est)?,
        (_, Some(est), PhaseTwo::L2) => comparison_distribution(ComparisonKind::L2, est)?,
        // Nothing learned in phase one: fall back to uniform.
        _ => EntryWeights::uniform(n1, n2),
    };
    let phase_two = sample_without_replacement(m, &weights, second, &rng.derive(PHASE_TWO), &phase_one)?;
    Ok(TwoPhaseSample {
        phase_one,
        phase_two,
        estimated_scores: scores,
        rank_deficiency,
    })
}

/// Two-phase sampling followed by nuclear-norm completion on the union.
pub fn two_phase_complete(m: &DenseMatrix, cfg: &TwoPhaseConfig, rng: &RandomStream) -> Result<TwoPhaseOutcome> {
    let sample = two_phase_sample(m, cfg, rng)?;
    let report = complete_nuclear(&sample.union()?, &cfg.solver)?;
    Ok(TwoPhaseOutcome { sample, report })
}

#[derive(Clone, Debug)]
pub struct RowCoherentOutcome {
    pub report: SolveReport,
    pub rows: Vec<usize>,
    /// Numerical rank of the picked rows.
    pub row_rank: usize,
    pub rank_deficient: bool,
    /// `ν̃_j = (n2/r) ‖Ṽᵀ e_j‖²` for the span of the picked rows.
    pub estimated_nu: Vec<f64>,
    pub row_probability: f64,
    /// Entries with `p_ij = min(c0 (μ0 + ν̃_j) r log²n / n, 1)`.
    pub entry_probabilities: ProbabilityMatrix,
    pub row_samples: usize,
    pub entry_samples: usize,
    /// Distinct entries observed overall.
    pub total_samples: usize,
}

/// Row probability `min(c0 μ0 r log n / n, 1)` with `n = max(n1, n2)`.
pub fn row_probability(n1: usize, n2: usize, mu0: f64, r: usize, c0: f64) -> f64 {
    let n = n1.max(n2) as f64;
    (c0 * mu0 * r as f64 * n.ln() / n).min(1.0)
}

/// Picks whole rows, learns the row space from them, then samples entries
/// with `p_ij = min(c0 (μ0 + ν̃_j) r log²n / n, 1)` and completes.
pub fn row_coherent_complete(
    m: &DenseMatrix,
    mu0: f64,
    r: usize,
    c0: f64,
    rng: &RandomStream,
    solver: &SolverConfig,
) -> Result<RowCoherentOutcome> {
    let (n1, n2) = m.shape();
    if r == 0 || r > n1.min(n2) {
        return Err(Error::RankTooLarge { rank: r, n_rows: n1, n_cols: n2 });
    }
    if !(mu0 >= 1.0) {
        return Err(Error::Contract(format!("mu0 must be at least 1, got {mu0}")));
    }
    LeveragedSampling::new(c0)?;

    let p_row = row_probability(n1, n2, mu0, r, c0);
    let (rows, row_obs) = sample_full_rows(m, p_row, &rng.derive(ROWS))?;

    let (row_rank, estimated_nu) = if rows.is_empty() {
        (0, vec![0.0; n2])
    } else {
        let picked = DenseMatrix::from_fn(rows.len(), n2, |k, j| m.get(rows[k], j));
        match svd_rank_r(&picked, r.min(rows.len())) {
            Ok(f) => {
                let v = f.v();
                let nu = (0..n2)
                    .map(|j| n2 as f64 / r as f64 * v.row(j).iter().map(|x| x * x).sum::<f64>())
                    .collect();
                (f.rank(), nu)
            }
            Err(Error::Degenerate(_)) => (0, vec![0.0; n2]),
            Err(e) => return Err(e),
        }
    };

    let n = n1.max(n2) as f64;
    let scale = c0 * r as f64 * n.ln().powi(2) / n;
    let p = ProbabilityMatrix::from_fn(n1, n2, |_, j| (scale * (mu0 + estimated_nu[j])).min(1.0))?;
    let entries = bernoulli_sample(m, &p, &rng.derive(ENTRIES))?;

    let picked: Vec<bool> = {
        let mut mask = vec![false; n1];
        rows.iter().for_each(|&i| mask[i] = true);
        mask
    };
    let entry_samples = entries.len();
    let fresh: Vec<_> = entries.entries().iter().copied().filter(|e| !picked[e.row]).collect();
    let fresh = ObservationSet::new(m.shape(), fresh, None)?;
    let all = row_obs.union(&fresh)?;
    let report = complete_nuclear(&all, solver)?;
    Ok(RowCoherentOutcome {
        report,
        row_samples: row_obs.len(),
        total_samples: all.len(),
        rows,
        row_rank,
        rank_deficient: row_rank < r,
        estimated_nu,
        row_probability: p_row,
        entry_probabilities: p,
        entry_samples,
    })
}
