//! Numerical checks of the dual-certificate argument: the tangent-space
//! operator norm `‖P_T R_Ω P_T − P_T‖`, the golfing construction of `Y`, and
//! the concentration ratio of `R_Ω − I` against the weighted norms.

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::leverage::{leverage_scores, ProbabilityMatrix};
use crate::matrix::DenseMatrix;
use crate::observation::{Observation, ObservationSet};
use crate::operators::{mu_inf2_norm, mu_inf_norm, r_omega, Tangent};
use crate::sampling::{bernoulli_sample, RandomStream};
use crate::svd::LowRankFactorization;

pub const DEFAULT_SIZE_CAP: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerIteration {
    pub max_iterations: usize,
    /// Stop once successive estimates differ by less than `tol` times the
    /// current one.
    pub tol: f64,
    pub size_cap: usize,
    pub start: RandomStream,
}

impl PowerIteration {
    pub fn new(tol: f64) -> Self {
        Self {
            max_iterations: 1000,
            tol,
            size_cap: DEFAULT_SIZE_CAP,
            start: RandomStream::new(0x5eed, 0),
        }
    }
}

/// Dense `δ_ij / p_ij` mask of a sampled set.
fn inverse_probability_mask(obs: &ObservationSet) -> Result<Mat<f64>> {
    let p = obs
        .probabilities()
        .ok_or_else(|| Error::Contract("operator norm needs sampling probabilities".into()))?;
    let (n1, n2) = obs.shape();
    let mut w = Mat::zeros(n1, n2);
    for ((i, j), &pij) in obs.indices().zip(p) {
        w[(i, j)] = 1.0 / pij;
    }
    Ok(w)
}

fn hadamard(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * b[(i, j)])
}

fn frob(a: &Mat<f64>) -> f64 {
    a.norm_l2()
}

/// `(P_T R_Ω P_T − P_T) Z`.
pub fn tangent_operator(obs: &ObservationSet, f: &LowRankFactorization, z: &DenseMatrix) -> Result<DenseMatrix> {
    if obs.shape() != f.shape() {
        return Err(Error::dims(f.shape(), obs.shape()));
    }
    z.ensure_same_shape(&DenseMatrix::zeros(f.shape().0, f.shape().1))?;
    let t = Tangent::new(f);
    let w = inverse_probability_mask(obs)?;
    let pz = t.project(z.as_faer());
    let out = t.project(hadamard(&pz, &w).as_ref()) - pz;
    Ok(DenseMatrix::from_faer(out.as_ref()))
}

/// Power-iteration estimate of `‖P_T R_Ω P_T − P_T‖_op` with default
/// settings.
pub fn operator_norm_tangent(obs: &ObservationSet, f: &LowRankFactorization, tol: f64) -> Result<f64> {
    operator_norm_tangent_with(obs, f, &PowerIteration::new(tol))
}

pub fn operator_norm_tangent_with(
    obs: &ObservationSet,
    f: &LowRankFactorization,
    settings: &PowerIteration,
) -> Result<f64> {
    let (n1, n2) = f.shape();
    if obs.shape() != f.shape() {
        return Err(Error::dims(f.shape(), obs.shape()));
    }
    let n = n1.max(n2);
    if n > settings.size_cap {
        return Err(Error::SizeCap { n, cap: settings.size_cap });
    }
    if !(settings.tol > 0.0) {
        return Err(Error::Contract("tolerance must be positive".into()));
    }
    let t = Tangent::new(f);
    let w = inverse_probability_mask(obs)?;
    let apply = |x: &Mat<f64>| -> Mat<f64> {
        let px = t.project(x.as_ref());
        t.project(hadamard(&px, &w).as_ref()) - px
    };

    let mut g = settings.start.rng();
    let seed = Mat::from_fn(n1, n2, |_, _| g.sample::<f64, _>(StandardNormal));
    let mut x = t.project(seed.as_ref());
    let norm = frob(&x);
    if norm == 0.0 {
        return Ok(0.0);
    }
    x = x * faer::Scale(1.0 / norm);
    let mut estimate = 0.0;
    for _ in 0..settings.max_iterations {
        let y = apply(&x);
        let next = frob(&y);
        if next == 0.0 {
            return Ok(0.0);
        }
        let done = (next - estimate).abs() < settings.tol * next;
        estimate = next;
        if done {
            break;
        }
        x = y * faer::Scale(1.0 / next);
    }
    Ok(estimate)
}

/// `k0 = ⌈20 log n⌉`.
pub fn golfing_batches(n: usize) -> usize {
    (20.0 * (n as f64).ln()).ceil().max(1.0) as usize
}

/// Per-batch probabilities `q_ij = 1 − (1 − p_ij)^{1/k0}`.
pub fn golfing_batch_probabilities(p: &ProbabilityMatrix, k0: usize) -> Result<ProbabilityMatrix> {
    let (n1, n2) = p.shape();
    let k = k0 as f64;
    ProbabilityMatrix::from_fn(n1, n2, |i, j| -((-p.get(i, j)).ln_1p() / k).exp_m1())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionFlags {
    /// `‖P_T R_Ω P_T − P_T‖ ≤ 1/2`
    pub operator_norm: bool,
    /// `‖P_T(Y) − UVᵀ‖_F ≤ 1/(4 n⁵)` read literally.
    pub tangent_literal: bool,
    /// `‖Δ_k‖_F ≤ 2^{-k} √r` for every `k`.
    pub tangent_surrogate: bool,
    /// `‖P_{T⊥}(Y)‖ ≤ 1/2`
    pub offspace: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CertificateReport {
    pub k0: usize,
    pub operator_norm_estimate: f64,
    /// `‖Δ_k‖_F` for `k = 0..=k0`.
    pub delta_frobenius_trace: Vec<f64>,
    pub tangent_residual: f64,
    pub offspace_spectral: f64,
    pub conditions_met: ConditionFlags,
    pub batch_sizes: Vec<usize>,
    /// Non-square inputs follow the square formulas with `n = max(n1, n2)`.
    pub extrapolated: bool,
    #[serde(skip)]
    pub certificate: DenseMatrix,
    #[serde(skip)]
    pub observed: ObservationSet,
}

impl CertificateReport {
    /// Median of `‖Δ_k‖_F / ‖Δ_{k−1}‖_F` over the steps whose predecessor is
    /// above round-off, `1e-12 ‖Δ_0‖_F`.
    pub fn median_contraction(&self) -> f64 {
        let floor = 1e-12 * self.delta_frobenius_trace.first().copied().unwrap_or(0.0);
        let mut ratios: Vec<f64> = self
            .delta_frobenius_trace
            .windows(2)
            .filter(|w| w[0] > floor && w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect();
        if ratios.is_empty() {
            return 0.0;
        }
        median(&mut ratios)
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// Builds `Y = W_{k0}` by golfing over `k0` independent batches drawn with
/// `q_ij`, whose union has the Bernoulli(`p`) law.
///
/// `Δ_0 = UVᵀ`, `W_k = W_{k−1} + R_{Ω_k} Δ_{k−1}`, `Δ_k = UVᵀ − P_T(W_k)`.
pub fn golfing_certificate(
    m: &DenseMatrix,
    f: &LowRankFactorization,
    p: &ProbabilityMatrix,
    rng: &RandomStream,
) -> Result<CertificateReport> {
    let shape = f.shape();
    if m.shape() != shape {
        return Err(Error::dims(shape, m.shape()));
    }
    if p.shape() != shape {
        return Err(Error::dims(shape, p.shape()));
    }
    let (n1, n2) = shape;
    let n = n1.max(n2);
    let k0 = golfing_batches(n);
    let q = golfing_batch_probabilities(p, k0)?;
    let t = Tangent::new(f);

    let uvt = f.uvt().to_faer();
    let mut delta = uvt.clone();
    let mut w = Mat::<f64>::zeros(n1, n2);
    let mut trace = vec![frob(&delta)];
    let mut hit = vec![false; n1 * n2];
    let mut batch_sizes = Vec::with_capacity(k0);
    for k in 1..=k0 {
        let batch = bernoulli_sample(m, &q, &rng.derive(k as u64))?;
        batch_sizes.push(batch.len());
        let mut step = Mat::<f64>::zeros(n1, n2);
        for (e, &qij) in batch.entries().iter().zip(batch.probabilities().unwrap_or(&[])) {
            step[(e.row, e.col)] = delta[(e.row, e.col)] / qij;
            hit[e.row * n2 + e.col] = true;
        }
        w += &step;
        delta = &delta - t.project(step.as_ref());
        trace.push(frob(&delta));
    }

    let tangent_residual = *trace.last().unwrap_or(&0.0);
    let off = &w - t.project(w.as_ref());
    let offspace_spectral = off
        .as_ref()
        .singular_values()
        .map_err(|_| Error::Convergence { iterations: 0 })?
        .first()
        .copied()
        .unwrap_or(0.0);

    let entries: Vec<Observation> = (0..n1 * n2)
        .filter(|&k| hit[k])
        .map(|k| Observation { row: k / n2, col: k % n2, value: m.values()[k] })
        .collect();
    let probs = entries.iter().map(|e| p.get(e.row, e.col)).collect();
    let observed = ObservationSet::new(shape, entries, Some(probs))?;
    let settings = PowerIteration {
        size_cap: usize::MAX,
        ..PowerIteration::new(1e-10)
    };
    let operator_norm_estimate = operator_norm_tangent_with(&observed, f, &settings)?;

    let sqrt_r = (f.rank() as f64).sqrt();
    let conditions_met = ConditionFlags {
        operator_norm: operator_norm_estimate <= 0.5,
        tangent_literal: tangent_residual <= 1.0 / (4.0 * (n as f64).powi(5)),
        tangent_surrogate: trace
            .iter()
            .enumerate()
            .all(|(k, d)| *d <= 0.5f64.powi(k as i32) * sqrt_r * (1.0 + 1e-12)),
        offspace: offspace_spectral <= 0.5,
    };
    Ok(CertificateReport {
        k0,
        operator_norm_estimate,
        delta_frobenius_trace: trace,
        tangent_residual,
        offspace_spectral,
        conditions_met,
        batch_sizes,
        extrapolated: n1 != n2,
        certificate: DenseMatrix::from_faer(w.as_ref()),
        observed,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConcentrationRatio {
    pub median: f64,
    pub p95: f64,
    pub ratios: Vec<f64>,
}

/// `‖(R_Ω − I) Z‖ / (‖Z‖_μ(∞) + ‖Z‖_μ(∞,2))` over `trials` Bernoulli(`P`)
/// draws.
pub fn concentration_ratio(
    z: &DenseMatrix,
    f: &LowRankFactorization,
    p: &ProbabilityMatrix,
    trials: usize,
    rng: &RandomStream,
) -> Result<ConcentrationRatio> {
    if trials == 0 {
        return Err(Error::Contract("need at least one trial".into()));
    }
    if z.shape() != f.shape() {
        return Err(Error::dims(f.shape(), z.shape()));
    }
    let scores = leverage_scores(f);
    let r = f.rank();
    let denom = mu_inf_norm(z, &scores, r)? + mu_inf2_norm(z, &scores, r)?;
    let mut ratios = Vec::with_capacity(trials);
    for k in 0..trials {
        if denom == 0.0 {
            ratios.push(0.0);
            continue;
        }
        let obs = bernoulli_sample(z, p, &rng.derive(k as u64))?;
        let gap = r_omega(&obs, z)?.try_sub(z)?;
        ratios.push(gap.spectral_norm()? / denom);
    }
    let mut sorted = ratios.clone();
    let med = median(&mut sorted);
    let idx = ((0.95 * trials as f64).ceil() as usize).clamp(1, trials) - 1;
    Ok(ConcentrationRatio {
        median: med,
        p95: sorted[idx],
        ratios,
    })
}
