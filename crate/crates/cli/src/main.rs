use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use levcomp::certify::golfing_certificate;
use levcomp::harness::{add_noise, power_law_matrix, write_csv, Axis, Scheme, SweepSpec};
use levcomp::io::{read_matrix, read_observations, read_weights, write_matrix, write_observations};
use levcomp::leverage::{leverage_scores, LeveragedSampling, ProbabilityMatrix};
use levcomp::lowerbound::{construct_hard_pair, indistinguishability_test};
use levcomp::pipelines::{row_coherent_complete, two_phase_complete, PhaseTwo, TwoPhaseConfig};
use levcomp::sampling::{bernoulli_sample, sample_uniform, RandomStream};
use levcomp::solver::{complete_nuclear, complete_weighted, SolverConfig};
use levcomp::svd::svd_rank_r;
use levcomp::DenseMatrix;

#[derive(Parser)]
#[command(name = "levcomp", version, about = "Leverage-score sampling and nuclear-norm matrix completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a power-law test matrix M = D U Vᵀ D with unit Frobenius norm.
    Generate(GenerateArgs),
    /// Draw an observation set from a matrix file.
    Sample(SampleArgs),
    /// Complete a matrix from an observation file.
    Complete(CompleteArgs),
    /// Two-phase sampling and completion; one JSON line per trial.
    Twophase(TwoPhaseArgs),
    /// Row sampling, row-space scores, leveraged sampling, completion.
    Rowcoherent(RowCoherentArgs),
    /// Golfing certificate diagnostics; one JSON line per trial.
    Certify(CertifyArgs),
    /// Hard instance pair and indistinguishability frequency.
    Lowerbound(LowerBoundArgs),
    /// Success-rate sweep from a TOML file; writes CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SolverArgs {
    /// Relative residual tolerance.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    /// Penalty growth factor per iteration.
    #[arg(long, default_value_t = 1.05)]
    growth: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            max_outer_iterations: self.max_iter,
            penalty_growth: self.growth,
            relative_residual_tolerance: self.tol,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Relative Frobenius size of added Gaussian noise.
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleScheme {
    /// Bernoulli with leveraged probabilities from the rank-r SVD.
    Leverage,
    /// Exactly --count entries uniformly without replacement.
    Uniform,
    /// Bernoulli with constant probability --p.
    Constant,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long, value_enum, default_value_t = SampleScheme::Leverage)]
    scheme: SampleScheme,
    /// Rank used for leverage scores.
    #[arg(long)]
    rank: Option<usize>,
    /// Leveraged-sampling constant; defaults to the calibrated value.
    #[arg(long, conflicts_with = "count")]
    c0: Option<f64>,
    /// Sample count (uniform) or expected count (leverage).
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long)]
    obs: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// Two lines: diagonal of R, diagonal of C.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseTwoArg {
    Estimated,
    L1,
    L2,
}

#[derive(Args)]
struct TwoPhaseArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    rank: usize,
    /// Total budget m.
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    beta: f64,
    #[arg(long, value_enum, default_value_t = PhaseTwoArg::Estimated)]
    phase_two: PhaseTwoArg,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    success_threshold: f64,
    /// Completion of the first trial.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct RowCoherentArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    rank: usize,
    /// Bound on the column-space leverage scores; defaults to the true maximum.
    #[arg(long)]
    mu0: Option<f64>,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    success_threshold: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    matrix: PathBuf,
    #[arg(long)]
    rank: usize,
    #[arg(long)]
    c0: Option<f64>,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct LowerBoundArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    r: usize,
    /// Row targets a_k, comma separated.
    #[arg(long, value_delimiter = ',')]
    a: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    b: Vec<f64>,
    /// Defaults to s_k1.
    #[arg(long)]
    s_bar: Option<usize>,
    #[arg(long, default_value_t = 0)]
    i0: usize,
    #[arg(long, default_value_t = 0)]
    j0: usize,
    /// Defaults to 1/s_k1.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    m0: PathBuf,
    #[arg(long)]
    m1: PathBuf,
    /// JSON summary; stdout when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fill the seconds column with wall time.
    #[arg(long)]
    timing: bool,
    /// CSV destination; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    read_matrix(open(path)?).with_context(|| format!("reading {}", path.display()))
}

fn save_matrix(m: &DenseMatrix, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_matrix(m, &mut out)?;
    out.flush()?;
    Ok(())
}

fn emit(line: serde_json::Value) -> Result<()> {
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    serde_json::to_writer(&mut lock, &line)?;
    writeln!(lock)?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Sample(a) => sample(a),
        Command::Complete(a) => complete(a),
        Command::Twophase(a) => twophase(a),
        Command::Rowcoherent(a) => rowcoherent(a),
        Command::Certify(a) => certify(a),
        Command::Lowerbound(a) => lowerbound(a),
        Command::Sweep(a) => sweep(a),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let stream = RandomStream::new(a.seed, 0);
    let (m, _) = power_law_matrix(a.n, a.r, a.alpha, &stream.derive(0))?;
    let m = add_noise(&m, a.sigma, &stream.derive(1))?;
    save_matrix(&m, &a.output)
}

fn sample(a: SampleArgs) -> Result<()> {
    let m = load_matrix(&a.matrix)?;
    let stream = RandomStream::new(a.seed, 0);
    let (n1, n2) = m.shape();
    let obs = match a.scheme {
        SampleScheme::Uniform => {
            let count = a.count.context("--count is required for uniform sampling")?;
            sample_uniform(&m, count, &stream)?
        }
        SampleScheme::Constant => {
            let p = a.p.context("--p is required for constant sampling")?;
            bernoulli_sample(&m, &ProbabilityMatrix::constant(n1, n2, p)?, &stream)?
        }
        SampleScheme::Leverage => {
            let r = a.rank.context("--rank is required for leverage sampling")?;
            let scores = leverage_scores(&svd_rank_r(&m, r)?);
            let law = match (a.count, a.c0) {
                (Some(count), _) => LeveragedSampling::for_expected_count(&scores, count as f64)?,
                (None, Some(c0)) => LeveragedSampling::new(c0)?,
                (None, None) => LeveragedSampling::calibrated(n1, n2, r),
            };
            bernoulli_sample(&m, &law.distribution(&scores), &stream)?
        }
    };
    let mut out = create(&a.output)?;
    write_observations(&obs, &mut out)?;
    out.flush()?;
    Ok(())
}

fn complete(a: CompleteArgs) -> Result<()> {
    let obs = read_observations(open(&a.obs)?).with_context(|| format!("reading {}", a.obs.display()))?;
    let cfg = a.solver.config();
    let report = match &a.weights {
        Some(path) => complete_weighted(&obs, &read_weights(open(path)?)?, &cfg)?,
        None => complete_nuclear(&obs, &cfg)?,
    };
    save_matrix(&report.x_hat, &a.output)?;
    emit(json!({
        "iterations": report.iterations,
        "final_constraint_residual": report.final_constraint_residual,
        "nuclear_norm_value": report.nuclear_norm_value,
        "converged": report.converged,
    }))
}

fn twophase(a: TwoPhaseArgs) -> Result<()> {
    let m = load_matrix(&a.matrix)?;
    let cfg = TwoPhaseConfig {
        phase_two: match a.phase_two {
            PhaseTwoArg::Estimated => PhaseTwo::Estimated,
            PhaseTwoArg::L1 => PhaseTwo::L1,
            PhaseTwoArg::L2 => PhaseTwo::L2,
        },
        solver: a.solver.config(),
        ..TwoPhaseConfig::new(a.rank, a.budget, a.beta)
    };
    for t in 0..a.trials {
        let stream = RandomStream::new(a.seed, t as u64);
        let out = two_phase_complete(&m, &cfg, &stream)?;
        let rel_err = out.report.relative_error(&m)?;
        if t == 0 {
            if let Some(path) = &a.output {
                save_matrix(&out.report.x_hat, path)?;
            }
        }
        emit(json!({
            "seed": a.seed,
            "stream": t,
            "m": a.budget,
            "beta": a.beta,
            "success": out.report.converged && rel_err <= a.success_threshold,
            "rel_err": rel_err,
            "phase_one_samples": out.sample.phase_one.len(),
            "phase_two_samples": out.sample.phase_two.len(),
            "rank_deficiency": out.sample.rank_deficiency,
            "iterations": out.report.iterations,
            "converged": out.report.converged,
        }))?;
    }
    Ok(())
}

fn rowcoherent(a: RowCoherentArgs) -> Result<()> {
    let m = load_matrix(&a.matrix)?;
    let (n1, n2) = m.shape();
    let mu0 = match a.mu0 {
        Some(mu0) => mu0,
        None => leverage_scores(&svd_rank_r(&m, a.rank)?).mu().iter().copied().fold(1.0, f64::max),
    };
    let c0 = a.c0.unwrap_or(LeveragedSampling::calibrated(n1, n2, a.rank).c0);
    let solver = a.solver.config();
    for t in 0..a.trials {
        let stream = RandomStream::new(a.seed, t as u64);
        let out = row_coherent_complete(&m, mu0, a.rank, c0, &stream, &solver)?;
        let rel_err = out.report.relative_error(&m)?;
        if t == 0 {
            if let Some(path) = &a.output {
                save_matrix(&out.report.x_hat, path)?;
            }
        }
        emit(json!({
            "seed": a.seed,
            "stream": t,
            "mu0": mu0,
            "c0": c0,
            "success": out.report.converged && rel_err <= a.success_threshold,
            "rel_err": rel_err,
            "rows": out.rows.len(),
            "row_rank": out.row_rank,
            "rank_deficient": out.rank_deficient,
            "row_samples": out.row_samples,
            "entry_samples": out.entry_samples,
            "total_samples": out.total_samples,
        }))?;
    }
    Ok(())
}

fn certify(a: CertifyArgs) -> Result<()> {
    let m = load_matrix(&a.matrix)?;
    let (n1, n2) = m.shape();
    let f = svd_rank_r(&m, a.rank)?;
    let scores = leverage_scores(&f);
    let law = match a.c0 {
        Some(c0) => LeveragedSampling::new(c0)?,
        None => LeveragedSampling::calibrated(n1, n2, a.rank),
    };
    let p = law.distribution(&scores);
    for t in 0..a.trials {
        let stream = RandomStream::new(a.seed, t as u64);
        let report = golfing_certificate(&m, &f, &p, &stream)?;
        let mut record = serde_json::to_value(&report)?;
        record["stream"] = json!(t);
        record["median_contraction"] = json!(report.median_contraction());
        emit(record)?;
    }
    Ok(())
}

fn lowerbound(a: LowerBoundArgs) -> Result<()> {
    if a.a.len() != a.r || a.b.len() != a.r {
        bail!("--a and --b need exactly r = {} values each", a.r);
    }
    let probe = construct_hard_pair(a.n, a.r, &a.a, &a.b, a.n, a.i0, a.j0)?;
    let s_bar = a.s_bar.unwrap_or(probe.s[probe.k1]);
    let inst = construct_hard_pair(a.n, a.r, &a.a, &a.b, s_bar, a.i0, a.j0)?;
    let eta = a.eta.unwrap_or_else(|| inst.default_eta());
    let p_block = inst.boundary_probability(eta).min(1.0);
    let p = ProbabilityMatrix::constant(a.n, a.n, p_block)?;
    let result = indistinguishability_test(&inst, &p, a.trials, &RandomStream::new(a.seed, 0))?;
    save_matrix(&inst.m0, &a.m0)?;
    save_matrix(&inst.m1, &a.m1)?;
    let summary = json!({
        "instance": inst,
        "eta": eta,
        "block_probability": p_block,
        "result": result,
    });
    match &a.summary {
        Some(path) => {
            let mut out = create(path)?;
            serde_json::to_writer_pretty(&mut out, &summary)?;
            writeln!(out)?;
        }
        None => emit(summary)?,
    }
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut spec = SweepSpec::from_toml_str(&text).with_context(|| format!("parsing {}", a.config.display()))?;
    if let Some(s) = &a.scheme {
        spec.experiment.scheme = s.parse::<Scheme>()?;
    }
    if let Some(t) = a.trials {
        spec.experiment.trials = t;
    }
    if let Some(s) = a.seed {
        spec.experiment.seed = s;
    }
    spec.experiment.record_timing |= a.timing;
    let report = spec.run()?;
    match &a.output {
        Some(path) => {
            let mut out = create(path)?;
            write_csv(&report.rows, &mut out)?;
            out.flush()?;
        }
        None => write_csv(&report.rows, io::stdout().lock())?,
    }
    let axis = match spec.sweep.axis {
        Axis::None | Axis::Alpha => "alpha",
        Axis::Beta => "beta",
        Axis::N => "n",
    };
    for (value, minimal) in &report.minimal {
        eprintln!("{axis} = {value}: minimal successful m = {}", minimal.map_or("none".to_string(), |m| m.to_string()));
    }
    Ok(())
}
