//! Observation-set generation: independent Bernoulli draws, fixed-size
//! weighted draws without replacement, and whole-row sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leverage::{EntryWeights, ProbabilityMatrix};
use crate::matrix::DenseMatrix;
use crate::observation::{Observation, ObservationSet};

/// A reproducible random substream: `(seed, stream)` fixes every draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomStream {
    pub seed: u64,
    pub stream: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// A child stream tagged by `tag`, independent of the parent's draws.
    pub fn derive(&self, tag: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Includes each entry independently with probability `p_ij`.
///
/// One uniform variate is consumed per entry in row-major order, so the
/// result depends only on `(P, stream)`.
pub fn bernoulli_sample(
    m: &DenseMatrix,
    p: &ProbabilityMatrix,
    rng: &RandomStream,
) -> Result<ObservationSet> {
    if m.shape() != p.shape() {
        return Err(Error::dims(m.shape(), p.shape()));
    }
    let mut g = rng.rng();
    let (n1, n2) = m.shape();
    let mut entries = Vec::new();
    let mut probs = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            let pij = p.get(i, j);
            let u: f64 = g.random();
            if u < pij {
                entries.push(Observation {
                    row: i,
                    col: j,
                    value: m.get(i, j),
                });
                probs.push(pij);
            }
        }
    }
    ObservationSet::new(m.shape(), entries, Some(probs))
}

/// Draws exactly `count` distinct entries outside `exclude`, sequentially
/// with probability proportional to `weights` and renormalizing after each
/// draw.
///
/// Implemented as an exponential race: entry `e` gets key `E_e / w_e` with
/// `E_e ~ Exp(1)` and the `count` smallest keys win, in key order. This has
/// the same law as sequential renormalized draws.
pub fn sample_without_replacement(
    m: &DenseMatrix,
    weights: &EntryWeights,
    count: usize,
    rng: &RandomStream,
    exclude: &ObservationSet,
) -> Result<ObservationSet> {
    if m.shape() != weights.shape() {
        return Err(Error::dims(m.shape(), weights.shape()));
    }
    if m.shape() != exclude.shape() {
        return Err(Error::dims(m.shape(), exclude.shape()));
    }
    let (_, n2) = m.shape();
    let excluded = exclude.mask();
    let mut g = rng.rng();
    let mut keyed: Vec<(f64, usize)> = Vec::new();
    for (k, &w) in weights.weights().iter().enumerate() {
        // Always draw so the stream position is independent of `exclude`.
        let u: f64 = g.random();
        if w > 0.0 && !excluded[k] {
            let e = -(1.0 - u).ln();
            keyed.push((e / w, k));
        }
    }
    if count > keyed.len() {
        return Err(Error::InfeasibleBudget {
            requested: count,
            available: keyed.len(),
        });
    }
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if count < keyed.len() && count > 0 {
        keyed.select_nth_unstable_by(count - 1, by_key);
    }
    keyed.truncate(count);
    keyed.sort_unstable_by(by_key);
    let entries = keyed
        .into_iter()
        .map(|(_, k)| Observation {
            row: k / n2,
            col: k % n2,
            value: m.values()[k],
        })
        .collect();
    ObservationSet::new(m.shape(), entries, None)
}

/// `count` entries uniformly without replacement.
pub fn sample_uniform(m: &DenseMatrix, count: usize, rng: &RandomStream) -> Result<ObservationSet> {
    let (n1, n2) = m.shape();
    sample_without_replacement(
        m,
        &EntryWeights::uniform(n1, n2),
        count,
        rng,
        &ObservationSet::empty(m.shape()),
    )
}

/// Keeps each row independently with probability `p` and observes every
/// entry of the kept rows. Returns the kept row indices and the entries.
pub fn sample_full_rows(
    m: &DenseMatrix,
    p: f64,
    rng: &RandomStream,
) -> Result<(Vec<usize>, ObservationSet)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Contract(format!("row probability {p} outside [0, 1]")));
    }
    let mut g = rng.rng();
    let rows: Vec<usize> = (0..m.n_rows())
        .filter(|_| g.random::<f64>() < p)
        .collect();
    let entries: Vec<Observation> = rows
        .iter()
        .flat_map(|&i| {
            (0..m.n_cols()).map(move |j| Observation {
                row: i,
                col: j,
                value: m.get(i, j),
            })
        })
        .collect();
    let probs = vec![p; entries.len()];
    let obs = ObservationSet::new(m.shape(), entries, (p > 0.0).then_some(probs))?;
    Ok((rows, obs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, n, |_, _| 1.0)
    }

    #[test]
    fn bernoulli_extremes() {
        let m = ones(5);
        let s = RandomStream::new(1, 0);
        let none = bernoulli_sample(&m, &ProbabilityMatrix::constant(5, 5, 0.0).unwrap(), &s).unwrap();
        assert!(none.is_empty());
        let all = bernoulli_sample(&m, &ProbabilityMatrix::constant(5, 5, 1.0).unwrap(), &s).unwrap();
        assert_eq!(all.len(), 25);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let m = ones(10);
        let p = ProbabilityMatrix::constant(10, 10, 0.5).unwrap();
        let a = bernoulli_sample(&m, &p, &RandomStream::new(7, 3)).unwrap();
        let b = bernoulli_sample(&m, &p, &RandomStream::new(7, 3)).unwrap();
        let c = bernoulli_sample(&m, &p, &RandomStream::new(7, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(RandomStream::new(7, 3).derive(1), RandomStream::new(7, 3).derive(2));
    }

    #[test]
    fn without_replacement_full_and_single() {
        let m = ones(3);
        let s = RandomStream::new(2, 0);
        let all = sample_uniform(&m, 9, &s).unwrap();
        assert_eq!(all.len(), 9);
        let mut raw = vec![0.0; 9];
        raw[4] = 1.0;
        let w = EntryWeights::from_raw((3, 3), raw).unwrap();
        let one = sample_without_replacement(&m, &w, 1, &s, &ObservationSet::empty((3, 3))).unwrap();
        assert_eq!(one.indices().collect::<Vec<_>>(), vec![(1, 1)]);
        assert!(matches!(
            sample_without_replacement(&m, &w, 2, &s, &ObservationSet::empty((3, 3))),
            Err(Error::InfeasibleBudget { requested: 2, available: 1 })
        ));
    }

    #[test]
    fn without_replacement_respects_exclusion() {
        let m = ones(4);
        let s = RandomStream::new(3, 0);
        let first = sample_uniform(&m, 6, &s).unwrap();
        let second = sample_without_replacement(
            &m,
            &EntryWeights::uniform(4, 4),
            10,
            &s.derive(1),
            &first,
        )
        .unwrap();
        assert!(second.indices().all(|(i, j)| !first.contains(i, j)));
        assert!(first.union(&second).is_ok());
    }

    #[test]
    fn full_rows_extremes() {
        let m = ones(6);
        let s = RandomStream::new(4, 0);
        let (rows, obs) = sample_full_rows(&m, 1.0, &s).unwrap();
        assert_eq!(rows, (0..6).collect::<Vec<_>>());
        assert_eq!(obs.len(), 36);
        let (rows, obs) = sample_full_rows(&m, 0.0, &s).unwrap();
        assert!(rows.is_empty() && obs.is_empty());
        assert!(sample_full_rows(&m, 1.5, &s).is_err());
    }
}
