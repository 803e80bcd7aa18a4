//! The adversarial pair behind the necessity of leveraged sampling.
//!
//! `M0 = A Bᵀ` is block diagonal: rows split into contiguous blocks `I_k`
//! of size `s_k = 2n/(a_k r)`, columns into `J_k` of size `t_k = 2n/(b_k r)`,
//! with `A_ik = 1/√s_k` on `I_k` and `B_jk = 1/√t_k` on `J_k`. `M1 = Ā Bᵀ`
//! differs from `M0` only on `{i*} × J_{k2}`, where `Ā_{i*,k2} = −1/√s̄`.
//! A location-invariant sampler that leaves row `i*` of that block empty
//! cannot tell the two apart.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::leverage::ProbabilityMatrix;
use crate::matrix::DenseMatrix;
use crate::sampling::RandomStream;
use rand::Rng;

const INTEGRALITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct HardInstance {
    pub n: usize,
    pub r: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub s: Vec<usize>,
    pub t: Vec<usize>,
    pub s_bar: usize,
    pub i0: usize,
    pub j0: usize,
    pub i_star: usize,
    pub k1: usize,
    pub k2: usize,
    #[serde(skip)]
    pub m0: DenseMatrix,
    #[serde(skip)]
    pub m1: DenseMatrix,
}

impl HardInstance {
    /// Row range of block `k`.
    pub fn row_block(&self, k: usize) -> std::ops::Range<usize> {
        block(&self.s, k)
    }

    pub fn col_block(&self, k: usize) -> std::ops::Range<usize> {
        block(&self.t, k)
    }

    /// The critical probability `log(1/η) / (2 t_{k2})`.
    pub fn boundary_probability(&self, eta: f64) -> f64 {
        (1.0 / eta).ln() / (2.0 * self.t[self.k2] as f64)
    }

    /// `η = 1/s_{k1}`.
    pub fn default_eta(&self) -> f64 {
        1.0 / self.s[self.k1] as f64
    }
}

fn block(sizes: &[usize], k: usize) -> std::ops::Range<usize> {
    let start: usize = sizes[..k].iter().sum();
    start..start + sizes[k]
}

fn block_sizes(n: usize, r: usize, targets: &[f64], name: &str) -> Result<Vec<usize>> {
    if targets.len() != r {
        return Err(Error::Construction(format!("{name} needs {r} targets, got {}", targets.len())));
    }
    let lo = 2.0 / r as f64;
    let hi = 2.0 * n as f64 / r as f64;
    let mut sizes = Vec::with_capacity(r);
    for (k, &x) in targets.iter().enumerate() {
        if !(x >= lo - INTEGRALITY_TOL && x <= hi + INTEGRALITY_TOL) {
            return Err(Error::Construction(format!("{name}[{k}] = {x} outside [{lo}, {hi}]")));
        }
        let size = 2.0 * n as f64 / (x * r as f64);
        let rounded = size.round();
        if (size - rounded).abs() > INTEGRALITY_TOL * size.max(1.0) || rounded < 1.0 {
            return Err(Error::Construction(format!(
                "block size 2n/({name}[{k}] r) = {size} is not a positive integer"
            )));
        }
        sizes.push(rounded as usize);
    }
    let total: usize = sizes.iter().sum();
    if total != n {
        return Err(Error::Construction(format!(
            "{name} block sizes {sizes:?} sum to {total}, not {n}"
        )));
    }
    Ok(sizes)
}

fn locate(sizes: &[usize], idx: usize) -> usize {
    let mut acc = 0;
    for (k, &s) in sizes.iter().enumerate() {
        acc += s;
        if idx < acc {
            return k;
        }
    }
    sizes.len() - 1
}

/// Builds `(M0, M1)` for targets `a`, `b`. The flipped row `i*` is `i0`.
///
/// Block sizes must come out integral and sum to `n`, which forces
/// `Σ 1/a_k = Σ 1/b_k = r/2`.
pub fn construct_hard_pair(
    n: usize,
    r: usize,
    a: &[f64],
    b: &[f64],
    s_bar: usize,
    i0: usize,
    j0: usize,
) -> Result<HardInstance> {
    if r < 1 || r > n {
        return Err(Error::Construction(format!("need 1 ≤ r ≤ n, got r = {r}, n = {n}")));
    }
    if i0 >= n || j0 >= n {
        return Err(Error::Construction(format!("index ({i0}, {j0}) outside {n}x{n}")));
    }
    let s = block_sizes(n, r, a, "a")?;
    let t = block_sizes(n, r, b, "b")?;
    let k1 = locate(&s, i0);
    let k2 = locate(&t, j0);
    if s_bar < s[k1] {
        return Err(Error::Construction(format!("s_bar = {s_bar} below s_k1 = {}", s[k1])));
    }
    let row_block: Vec<usize> = (0..n).map(|i| locate(&s, i)).collect();
    let col_block: Vec<usize> = (0..n).map(|j| locate(&t, j)).collect();
    let a_entry = |i: usize, k: usize| if row_block[i] == k { 1.0 / (s[k] as f64).sqrt() } else { 0.0 };
    let b_entry = |j: usize, k: usize| if col_block[j] == k { 1.0 / (t[k] as f64).sqrt() } else { 0.0 };
    let m0 = DenseMatrix::from_fn(n, n, |i, j| {
        let k = row_block[i];
        a_entry(i, k) * b_entry(j, k)
    });
    let i_star = i0;
    let flipped = -1.0 / (s_bar as f64).sqrt();
    let m1 = DenseMatrix::from_fn(n, n, |i, j| {
        (0..r)
            .map(|k| {
                let ak = if i == i_star && k == k2 { flipped } else { a_entry(i, k) };
                ak * b_entry(j, k)
            })
            .sum()
    });
    Ok(HardInstance {
        n,
        r,
        a: a.to_vec(),
        b: b.to_vec(),
        s,
        t,
        s_bar,
        i0,
        j0,
        i_star,
        k1,
        k2,
        m0,
        m1,
    })
}

/// Nearest feasible targets: block sizes `round(2n/(x_k r))`, adjusted one
/// unit at a time (largest block first) until they sum to `n`, mapped back
/// to `x_k = 2n/(size_k r)`.
pub fn feasible_targets(n: usize, r: usize, targets: &[f64]) -> Result<Vec<f64>> {
    if targets.len() != r || r == 0 || r > n {
        return Err(Error::Construction(format!("need {r} targets with 1 ≤ r ≤ n")));
    }
    let mut sizes: Vec<usize> = targets
        .iter()
        .map(|&x| (2.0 * n as f64 / (x * r as f64)).round().clamp(1.0, n as f64) as usize)
        .collect();
    loop {
        let total: usize = sizes.iter().sum();
        if total == n {
            break;
        }
        if total > n {
            let k = (0..r).filter(|&k| sizes[k] > 1).max_by_key(|&k| sizes[k]).unwrap_or(0);
            sizes[k] -= 1;
        } else {
            let k = (0..r).min_by_key(|&k| sizes[k]).unwrap_or(0);
            sizes[k] += 1;
        }
    }
    Ok(sizes.iter().map(|&s| 2.0 * n as f64 / (s as f64 * r as f64)).collect())
}

/// Checks that identical rows (columns) of `m` carry identical probability
/// rows (columns).
pub fn check_location_invariance(m: &DenseMatrix, p: &ProbabilityMatrix) -> Result<()> {
    if m.shape() != p.shape() {
        return Err(Error::dims(m.shape(), p.shape()));
    }
    let (n1, n2) = m.shape();
    for i in 0..n1 {
        for i2 in i + 1..n1 {
            if m.row(i) == m.row(i2) && (0..n2).any(|j| p.get(i, j) != p.get(i2, j)) {
                return Err(Error::LocationInvariance(format!("identical rows {i} and {i2}")));
            }
        }
    }
    let cols: Vec<Vec<f64>> = (0..n2).map(|j| m.col(j)).collect();
    for j in 0..n2 {
        for j2 in j + 1..n2 {
            if cols[j] == cols[j2] && (0..n1).any(|i| p.get(i, j) != p.get(i, j2)) {
                return Err(Error::LocationInvariance(format!("identical columns {j} and {j2}")));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct Indistinguishability {
    pub trials: usize,
    /// Frequency of some row of `I_{k1}` having no observation in `J_{k2}`.
    pub empirical: f64,
    /// Three binomial standard errors.
    pub half_width: f64,
    /// `1 − Π_{i∈I_k1} (1 − Π_{j∈J_k2} (1 − p_ij))`
    pub analytic: f64,
}

/// Monte-Carlo frequency of the event that some row of block `I_{k1}` has
/// no observed entry in `J_{k2}`.
pub fn indistinguishability_test(
    inst: &HardInstance,
    p: &ProbabilityMatrix,
    trials: usize,
    rng: &RandomStream,
) -> Result<Indistinguishability> {
    if trials == 0 {
        return Err(Error::Contract("need at least one trial".into()));
    }
    check_location_invariance(&inst.m0, p)?;
    let rows = inst.row_block(inst.k1);
    let cols = inst.col_block(inst.k2);

    let analytic = 1.0
        - rows
            .clone()
            .map(|i| 1.0 - cols.clone().map(|j| 1.0 - p.get(i, j)).product::<f64>())
            .product::<f64>();

    let mut hits = 0usize;
    for k in 0..trials {
        let mut g = rng.derive(k as u64).rng();
        let mut empty_row = false;
        for i in rows.clone() {
            // Draw the whole block so every trial consumes the same stream.
            let mut seen = false;
            for j in cols.clone() {
                seen |= g.random::<f64>() < p.get(i, j);
            }
            empty_row |= !seen;
        }
        hits += usize::from(empty_row);
    }
    let freq = hits as f64 / trials as f64;
    Ok(Indistinguishability {
        trials,
        empirical: freq,
        half_width: 3.0 * (freq * (1.0 - freq) / trials as f64).sqrt(),
        analytic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_split() {
        let inst = construct_hard_pair(6, 2, &[2.0, 2.0], &[2.0, 2.0], 3, 0, 4).unwrap();
        assert_eq!(inst.s, vec![3, 3]);
        assert_eq!(inst.t, vec![3, 3]);
        assert!((inst.m0.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(inst.m0.get(0, 4), 0.0);
        assert!((inst.m0.frobenius_norm() - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!((inst.k1, inst.k2), (0, 1));
    }

    #[test]
    fn pair_differs_only_on_flipped_row_block() {
        let inst = construct_hard_pair(24, 3, &[4.0 / 3.0, 2.0, 4.0], &[2.0; 3], 12, 0, 10).unwrap();
        let cols = inst.col_block(inst.k2);
        for i in 0..24 {
            for j in 0..24 {
                let same = inst.m0.get(i, j) == inst.m1.get(i, j);
                assert_eq!(same, !(i == inst.i_star && cols.contains(&j)));
            }
        }
    }

    #[test]
    fn rejects_fractional_and_unbalanced_blocks() {
        assert!(matches!(
            construct_hard_pair(6, 2, &[1.5, 2.0], &[2.0, 2.0], 4, 0, 0),
            Err(Error::Construction(_))
        ));
        assert!(construct_hard_pair(8, 2, &[2.0, 4.0], &[2.0, 2.0], 4, 0, 0).is_err());
        assert!(construct_hard_pair(6, 2, &[2.0, 2.0], &[2.0, 2.0], 2, 0, 0).is_err());
    }

    #[test]
    fn feasible_targets_round_trip() {
        let a = feasible_targets(24, 3, &[1.3, 2.1, 3.9]).unwrap();
        assert!(construct_hard_pair(24, 3, &a, &[2.0; 3], 12, 0, 0).is_ok());
    }

    #[test]
    fn extreme_probabilities() {
        let inst = construct_hard_pair(6, 2, &[2.0, 2.0], &[2.0, 2.0], 3, 0, 4).unwrap();
        let s = RandomStream::new(3, 0);
        let none = indistinguishability_test(&inst, &ProbabilityMatrix::constant(6, 6, 0.0).unwrap(), 50, &s).unwrap();
        assert_eq!((none.empirical, none.analytic), (1.0, 1.0));
        let all = indistinguishability_test(&inst, &ProbabilityMatrix::constant(6, 6, 1.0).unwrap(), 50, &s).unwrap();
        assert_eq!((all.empirical, all.analytic), (0.0, 0.0));
    }

    #[test]
    fn location_variant_probabilities_are_rejected() {
        let inst = construct_hard_pair(6, 2, &[2.0, 2.0], &[2.0, 2.0], 3, 0, 4).unwrap();
        let p = ProbabilityMatrix::from_fn(6, 6, |i, _| if i == 1 { 0.9 } else { 0.1 }).unwrap();
        assert!(matches!(
            indistinguishability_test(&inst, &p, 10, &RandomStream::new(0, 0)),
            Err(Error::LocationInvariance(_))
        ));
    }
}
