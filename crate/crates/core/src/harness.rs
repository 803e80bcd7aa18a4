//! Monte-Carlo experiment driver: power-law instances, per-scheme trials,
//! success-rate sweeps over `m`, `α`, `β` and `n`, and CSV output.
//!
//! Every trial owns a substream derived from `(seed, trial)`, so matrices are
//! shared across schemes and sample sizes (common random numbers), and the
//! CSV is a pure function of the configuration unless timing is recorded.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leverage::{leverage_scores, LeverageScores, LeveragedSampling};
use crate::matrix::DenseMatrix;
use crate::observation::ObservationSet;
use crate::pipelines::{two_phase_sample, PhaseTwo, TwoPhaseConfig, PHASE_ONE};
use crate::sampling::{bernoulli_sample, sample_uniform, RandomStream};
use crate::solver::{complete_nuclear, SolverConfig};
use crate::svd::{svd_rank_r, LowRankFactorization};

pub const CSV_HEADER: &str =
    "scheme,alpha,beta,n,r,m,trials,success_frac,ci_halfwidth,median_rel_err,mean_samples,seconds";

const MATRIX: u64 = 10;
const NOISE: u64 = 11;
const SAMPLES: u64 = 12;
const ORACLE: u64 = 13;

/// Trials are run in fixed-size chunks; the minimal-`m` search may stop
/// between chunks once success is out of reach.
const CHUNK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    OracleLeverage,
    TwoPhase,
    Uniform,
    L1,
    L2,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::OracleLeverage => "oracle-leverage",
            Scheme::TwoPhase => "two-phase",
            Scheme::Uniform => "uniform",
            Scheme::L1 => "l1",
            Scheme::L2 => "l2",
        }
    }

    fn uses_beta(self) -> bool {
        matches!(self, Scheme::TwoPhase | Scheme::L1 | Scheme::L2)
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "oracle-leverage" | "oracle" => Scheme::OracleLeverage,
            "two-phase" | "twophase" => Scheme::TwoPhase,
            "uniform" => Scheme::Uniform,
            "l1" => Scheme::L1,
            "l2" => Scheme::L2,
            other => return Err(Error::Contract(format!("unknown scheme {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Every grid point with all trials.
    #[default]
    Grid,
    /// Doubling then bisection for the smallest successful grid point.
    Minimal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n: usize,
    pub r: usize,
    pub alpha: f64,
    pub scheme: Scheme,
    pub beta: f64,
    /// Sample counts `m`.
    pub sample_grid: Vec<usize>,
    /// Used when `sample_grid` is empty: `m = round(f · n log n)`.
    pub sample_grid_nlogn: Vec<f64>,
    pub trials: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    /// Fixed `c0` for the oracle scheme when no grid is given.
    pub c0: Option<f64>,
    pub success_threshold: f64,
    pub success_quantile: f64,
    pub search: SearchMode,
    /// Off by default so that output is reproducible byte for byte.
    pub record_timing: bool,
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 200,
            r: 5,
            alpha: 0.5,
            scheme: Scheme::TwoPhase,
            beta: 2.0 / 3.0,
            sample_grid: Vec::new(),
            sample_grid_nlogn: Vec::new(),
            trials: 40,
            noise_sigma: 0.0,
            seed: 0,
            c0: None,
            success_threshold: 0.01,
            success_quantile: 0.95,
            search: SearchMode::Grid,
            record_timing: false,
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.n {
            return Err(Error::RankTooLarge { rank: self.r, n_rows: self.n, n_cols: self.n });
        }
        if self.trials == 0 {
            return Err(Error::Contract("trials must be at least 1".into()));
        }
        if !(self.alpha >= 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::Contract("alpha and noise_sigma must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.beta) || !(0.0..=1.0).contains(&self.success_quantile) {
            return Err(Error::Contract("beta and success_quantile must lie in [0, 1]".into()));
        }
        if let Some(&m) = self.sample_grid.iter().find(|&&m| m > self.n * self.n) {
            return Err(Error::InfeasibleBudget { requested: m, available: self.n * self.n });
        }
        self.solver.validate()
    }

    /// Sorted, deduplicated sample counts for this configuration.
    pub fn grid(&self) -> Result<Vec<usize>> {
        let n = self.n as f64;
        let mut grid: Vec<usize> = if !self.sample_grid.is_empty() {
            self.sample_grid.clone()
        } else if !self.sample_grid_nlogn.is_empty() {
            self.sample_grid_nlogn
                .iter()
                .map(|f| ((f * n * n.ln()).round() as usize).min(self.n * self.n))
                .collect()
        } else if let (Scheme::OracleLeverage, Some(c0)) = (self.scheme, self.c0) {
            // Single point: the expected count of leveraged sampling at c0,
            // on the first trial's matrix.
            let inst = Instance::generate(self, 0)?;
            let p = LeveragedSampling::new(c0)?.distribution(&inst.scores);
            vec![p.expected_count().round() as usize]
        } else {
            return Err(Error::Contract("empty sample grid".into()));
        };
        grid.sort_unstable();
        grid.dedup();
        Ok(grid)
    }

    /// Largest failure count still compatible with success.
    fn allowed_failures(&self) -> usize {
        ((1.0 - self.success_quantile) * self.trials as f64 + 1e-9).floor() as usize
    }
}

/// `M = D U Vᵀ D / ‖D U Vᵀ D‖_F` with `D_ii = i^{-α}` (1-based) and
/// standard Gaussian `U`, `V`; returned with its rank-`r` factorization.
pub fn power_law_matrix(n: usize, r: usize, alpha: f64, rng: &RandomStream) -> Result<(DenseMatrix, LowRankFactorization)> {
    if r == 0 || r > n {
        return Err(Error::RankTooLarge { rank: r, n_rows: n, n_cols: n });
    }
    let mut g = rng.rng();
    let d: Vec<f64> = (1..=n).map(|i| (i as f64).powf(-alpha)).collect();
    let u = DenseMatrix::from_fn(n, r, |i, _| d[i] * g.sample::<f64, _>(StandardNormal));
    let v = DenseMatrix::from_fn(n, r, |j, _| d[j] * g.sample::<f64, _>(StandardNormal));
    let m = u.matmul(&v.transpose())?;
    let m = m.scale(1.0 / m.frobenius_norm());
    let f = svd_rank_r(&m, r)?;
    Ok((m, f))
}

/// `M + Z` with Gaussian `Z` rescaled to `‖Z‖_F = σ ‖M‖_F`.
pub fn add_noise(m: &DenseMatrix, sigma: f64, rng: &RandomStream) -> Result<DenseMatrix> {
    if !(sigma >= 0.0) {
        return Err(Error::Contract(format!("sigma must be nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(m.clone());
    }
    let mut g = rng.rng();
    let z = DenseMatrix::from_fn(m.n_rows(), m.n_cols(), |_, _| g.sample::<f64, _>(StandardNormal));
    let z = z.scale(sigma * m.frobenius_norm() / z.frobenius_norm());
    m.try_add(&z)
}

/// One trial's ground truth.
#[derive(Clone, Debug)]
pub struct Instance {
    pub clean: DenseMatrix,
    /// What the samplers see: `clean` plus noise.
    pub observed: DenseMatrix,
    pub scores: LeverageScores,
    pub stream: RandomStream,
}

impl Instance {
    pub fn generate(cfg: &ExperimentConfig, trial: usize) -> Result<Self> {
        let stream = RandomStream::new(cfg.seed, 0).derive(trial as u64);
        let (clean, f) = power_law_matrix(cfg.n, cfg.r, cfg.alpha, &stream.derive(MATRIX))?;
        let observed = add_noise(&clean, cfg.noise_sigma, &stream.derive(NOISE))?;
        Ok(Self {
            clean,
            observed,
            scores: leverage_scores(&f),
            stream: stream.derive(SAMPLES),
        })
    }
}

pub fn generate_instances(cfg: &ExperimentConfig) -> Result<Vec<Instance>> {
    (0..cfg.trials).into_par_iter().map(|t| Instance::generate(cfg, t)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialOutcome {
    pub samples: usize,
    /// `‖X̂ − M‖_F / ‖M‖_F` against the clean matrix; infinite on failure.
    pub rel_err: f64,
    pub converged: bool,
    pub success: bool,
}

/// Draws the scheme's sample set of nominal size `m` for one instance.
pub fn draw_samples(inst: &Instance, scheme: Scheme, m: usize, beta: f64, r: usize) -> Result<ObservationSet> {
    let phase = |kind| {
        let cfg = TwoPhaseConfig { phase_two: kind, ..TwoPhaseConfig::new(r, m, beta) };
        two_phase_sample(&inst.observed, &cfg, &inst.stream)?.union()
    };
    match scheme {
        Scheme::OracleLeverage => {
            let c0 = LeveragedSampling::for_expected_count(&inst.scores, m as f64)?;
            bernoulli_sample(&inst.observed, &c0.distribution(&inst.scores), &inst.stream.derive(ORACLE))
        }
        Scheme::Uniform => sample_uniform(&inst.observed, m, &inst.stream.derive(PHASE_ONE)),
        Scheme::TwoPhase => phase(PhaseTwo::Estimated),
        Scheme::L1 => phase(PhaseTwo::L1),
        Scheme::L2 => phase(PhaseTwo::L2),
    }
}

pub fn run_trial(cfg: &ExperimentConfig, inst: &Instance, m: usize) -> TrialOutcome {
    let attempt = || -> Result<(usize, f64, bool)> {
        let obs = draw_samples(inst, cfg.scheme, m, cfg.beta, cfg.r)?;
        let report = complete_nuclear(&obs, &cfg.solver)?;
        Ok((obs.len(), report.relative_error(&inst.clean)?, report.converged))
    };
    match attempt() {
        Ok((samples, rel_err, converged)) => TrialOutcome {
            samples,
            rel_err,
            converged,
            success: converged && rel_err <= cfg.success_threshold,
        },
        Err(_) => TrialOutcome {
            samples: 0,
            rel_err: f64::INFINITY,
            converged: false,
            success: false,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvRow {
    pub scheme: Scheme,
    pub alpha: f64,
    pub beta: Option<f64>,
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub trials: usize,
    pub success_frac: f64,
    pub ci_halfwidth: f64,
    pub median_rel_err: f64,
    pub mean_samples: f64,
    pub seconds: f64,
}

impl CsvRow {
    pub fn succeeded(&self, quantile: f64) -> bool {
        self.success_frac + 1e-12 >= quantile
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6e},{:.2},{:.3}",
            self.scheme.name(),
            self.alpha,
            self.beta.map(|b| b.to_string()).unwrap_or_default(),
            self.n,
            self.r,
            self.m,
            self.trials,
            self.success_frac,
            self.ci_halfwidth,
            self.median_rel_err,
            self.mean_samples,
            self.seconds,
        )
    }
}

pub fn write_csv<W: Write>(rows: &[CsvRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv_line())?;
    }
    Ok(())
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Runs the trials at one sample count. With `early_abort`, stops after the
/// first chunk in which failures exceed what success allows.
pub fn evaluate_point(cfg: &ExperimentConfig, instances: &[Instance], m: usize, early_abort: bool) -> (CsvRow, Vec<TrialOutcome>) {
    let start = Instant::now();
    let allowed = cfg.allowed_failures();
    let mut outcomes = Vec::with_capacity(instances.len());
    for chunk in instances.chunks(CHUNK) {
        let done: Vec<TrialOutcome> = chunk.par_iter().map(|inst| run_trial(cfg, inst, m)).collect();
        outcomes.extend(done);
        if early_abort && outcomes.iter().filter(|o| !o.success).count() > allowed {
            break;
        }
    }
    let k = outcomes.len() as f64;
    let frac = outcomes.iter().filter(|o| o.success).count() as f64 / k;
    let errs: Vec<f64> = outcomes.iter().map(|o| o.rel_err).collect();
    let row = CsvRow {
        scheme: cfg.scheme,
        alpha: cfg.alpha,
        beta: match cfg.scheme {
            Scheme::Uniform => Some(1.0),
            s if s.uses_beta() => Some(cfg.beta),
            _ => None,
        },
        n: cfg.n,
        r: cfg.r,
        m,
        trials: outcomes.len(),
        success_frac: frac,
        ci_halfwidth: 3.0 * (frac * (1.0 - frac) / k).sqrt(),
        median_rel_err: median(&errs),
        mean_samples: outcomes.iter().map(|o| o.samples as f64).sum::<f64>() / k,
        seconds: if cfg.record_timing { start.elapsed().as_secs_f64() } else { 0.0 },
    };
    (row, outcomes)
}

#[derive(Clone, Debug, Default)]
pub struct SweepReport {
    pub rows: Vec<CsvRow>,
    /// `(axis value, smallest successful m)` per sweep point.
    pub minimal: Vec<(f64, Option<usize>)>,
}

impl SweepReport {
    fn extend(&mut self, label: f64, other: SweepReport) {
        let min = other.minimal.first().and_then(|x| x.1);
        self.rows.extend(other.rows);
        self.minimal.push((label, min));
    }
}

/// Smallest grid point whose success fraction reaches the quantile, by
/// doubling over grid indices and then bisection. Rows for every evaluated
/// point are returned in increasing `m`.
pub fn minimal_successful_m(cfg: &ExperimentConfig, instances: &[Instance], grid: &[usize]) -> (Option<usize>, Vec<CsvRow>) {
    let mut rows: Vec<CsvRow> = Vec::new();
    let eval = |idx: usize, rows: &mut Vec<CsvRow>| -> bool {
        let (row, _) = evaluate_point(cfg, instances, grid[idx], true);
        let ok = row.trials == instances.len() && row.succeeded(cfg.success_quantile);
        rows.push(row);
        ok
    };
    if grid.is_empty() {
        return (None, rows);
    }
    let mut fail: Option<usize> = None;
    let mut step = 1;
    let mut idx = 0;
    let hit = loop {
        if eval(idx, &mut rows) {
            break Some(idx);
        }
        fail = Some(idx);
        if idx == grid.len() - 1 {
            break None;
        }
        idx = (idx + step).min(grid.len() - 1);
        step *= 2;
    };
    let Some(mut hi) = hit else {
        rows.sort_by_key(|r| r.m);
        return (None, rows);
    };
    if let Some(mut lo) = fail {
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if eval(mid, &mut rows) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    rows.sort_by_key(|r| r.m);
    (Some(grid[hi]), rows)
}

/// Success rates over the sample grid for one configuration.
pub fn success_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let instances = generate_instances(cfg)?;
    Ok(sweep_with(cfg, &instances, &grid))
}

fn sweep_with(cfg: &ExperimentConfig, instances: &[Instance], grid: &[usize]) -> SweepReport {
    let label = cfg.alpha;
    match cfg.search {
        SearchMode::Minimal => {
            let (min, rows) = minimal_successful_m(cfg, instances, grid);
            SweepReport { rows, minimal: vec![(label, min)] }
        }
        SearchMode::Grid => {
            let rows: Vec<CsvRow> = grid.iter().map(|&m| evaluate_point(cfg, instances, m, false).0).collect();
            let min = rows.iter().find(|r| r.succeeded(cfg.success_quantile)).map(|r| r.m);
            SweepReport { rows, minimal: vec![(label, min)] }
        }
    }
}

/// One sweep per `α`, each on its own instances.
pub fn alpha_sweep(cfg: &ExperimentConfig, alphas: &[f64]) -> Result<SweepReport> {
    let mut out = SweepReport::default();
    for &alpha in alphas {
        let c = ExperimentConfig { alpha, ..cfg.clone() };
        out.extend(alpha, success_sweep(&c)?);
    }
    Ok(out)
}

/// Two-phase sweeps over `β`, sharing instances across `β`.
pub fn beta_sweep(cfg: &ExperimentConfig, betas: &[f64]) -> Result<SweepReport> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let instances = generate_instances(cfg)?;
    let mut out = SweepReport::default();
    for &beta in betas {
        let c = ExperimentConfig { beta, scheme: Scheme::TwoPhase, ..cfg.clone() };
        c.validate()?;
        out.extend(beta, sweep_with(&c, &instances, &grid));
    }
    Ok(out)
}

/// Sweeps over `n`; give the grid as `sample_grid_nlogn` so it scales.
pub fn scaling_sweep(cfg: &ExperimentConfig, ns: &[usize]) -> Result<SweepReport> {
    let mut out = SweepReport::default();
    for &n in ns {
        let c = ExperimentConfig { n, ..cfg.clone() };
        out.extend(n as f64, success_sweep(&c)?);
    }
    Ok(out)
}

/// Axis a sweep file varies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// A single configuration.
    #[default]
    None,
    Alpha,
    Beta,
    N,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AxisSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
}

/// A sweep file:
///
/// ```toml
/// [experiment]
/// n = 200
/// scheme = "two-phase"
/// sample_grid_nlogn = [6.0, 8.0, 10.0]
///
/// [sweep]
/// axis = "beta"
/// values = [0.5, 0.7, 0.9, 1.0]
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub experiment: ExperimentConfig,
    pub sweep: AxisSpec,
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse { line, message: e.message().to_string() }
        })
    }

    pub fn run(&self) -> Result<SweepReport> {
        let values = &self.sweep.values;
        match self.sweep.axis {
            Axis::None => success_sweep(&self.experiment),
            Axis::Alpha => alpha_sweep(&self.experiment, values),
            Axis::Beta => beta_sweep(&self.experiment, values),
            Axis::N => {
                let ns: Vec<usize> = values.iter().map(|v| v.round() as usize).collect();
                scaling_sweep(&self.experiment, &ns)
            }
        }
    }
}
