//! Observed index sets Ω with their values and draw probabilities.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    shape: (usize, usize),
    entries: Vec<Observation>,
    probabilities: Option<Vec<f64>>,
}

impl ObservationSet {
    pub fn new(
        shape: (usize, usize),
        entries: Vec<Observation>,
        probabilities: Option<Vec<f64>>,
    ) -> Result<Self> {
        let (n1, n2) = shape;
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if e.row >= n1 || e.col >= n2 {
                return Err(Error::Contract(format!(
                    "index ({}, {}) out of range for {n1}x{n2}",
                    e.row, e.col
                )));
            }
            if !e.value.is_finite() {
                return Err(Error::NonFinite {
                    row: e.row,
                    col: e.col,
                });
            }
            if !seen.insert((e.row, e.col)) {
                return Err(Error::Contract(format!(
                    "duplicate observation ({}, {})",
                    e.row, e.col
                )));
            }
        }
        if let Some(p) = &probabilities {
            if p.len() != entries.len() {
                return Err(Error::Dimension {
                    expected: format!("{} probabilities", entries.len()),
                    got: format!("{}", p.len()),
                });
            }
            if let Some(k) = p.iter().position(|&x| !(x > 0.0 && x <= 1.0)) {
                return Err(Error::Contract(format!(
                    "probability {} at ({}, {}) outside (0, 1]",
                    p[k], entries[k].row, entries[k].col
                )));
            }
        }
        Ok(Self {
            shape,
            entries,
            probabilities,
        })
    }

    pub fn empty(shape: (usize, usize)) -> Self {
        Self {
            shape,
            entries: Vec::new(),
            probabilities: None,
        }
    }

    /// Observes `m` at the listed indices.
    pub fn from_indices(
        m: &DenseMatrix,
        indices: &[(usize, usize)],
        probabilities: Option<Vec<f64>>,
    ) -> Result<Self> {
        let entries = indices
            .iter()
            .map(|&(row, col)| {
                if row >= m.n_rows() || col >= m.n_cols() {
                    return Err(Error::Contract(format!("index ({row}, {col}) out of range")));
                }
                Ok(Observation {
                    row,
                    col,
                    value: m.get(row, col),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(m.shape(), entries, probabilities)
    }

    /// Every entry of `m` with probability one.
    pub fn full(m: &DenseMatrix) -> Self {
        let (n1, n2) = m.shape();
        let entries = (0..n1)
            .flat_map(|i| (0..n2).map(move |j| (i, j)))
            .map(|(row, col)| Observation {
                row,
                col,
                value: m.get(row, col),
            })
            .collect::<Vec<_>>();
        let k = entries.len();
        Self {
            shape: m.shape(),
            entries,
            probabilities: Some(vec![1.0; k]),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    pub fn probabilities(&self) -> Option<&[f64]> {
        self.probabilities.as_deref()
    }

    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().map(|e| (e.row, e.col))
    }

    /// Row-major membership mask.
    pub fn mask(&self) -> Vec<bool> {
        let (_, n2) = self.shape;
        let mut mask = vec![false; self.shape.0 * n2];
        for e in &self.entries {
            mask[e.row * n2 + e.col] = true;
        }
        mask
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.entries.iter().any(|e| e.row == row && e.col == col)
    }

    /// `P_Ω(M)`: observed values in place, zeros elsewhere.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.shape.0, self.shape.1);
        for e in &self.entries {
            out.set(e.row, e.col, e.value);
        }
        out
    }

    /// Same indices with values replaced by `f(row, col, value)`.
    pub fn map_values(&self, f: impl Fn(usize, usize, f64) -> f64) -> Result<Self> {
        let entries = self
            .entries
            .iter()
            .map(|e| Observation {
                value: f(e.row, e.col, e.value),
                ..*e
            })
            .collect();
        Self::new(self.shape, entries, self.probabilities.clone())
    }

    /// Union of two disjoint sets; probabilities are dropped.
    pub fn union(&self, other: &ObservationSet) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::dims(self.shape, other.shape));
        }
        let mut entries = self.entries.clone();
        entries.extend_from_slice(&other.entries);
        Self::new(self.shape, entries, None)
    }

    pub fn without_probabilities(mut self) -> Self {
        self.probabilities = None;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(row: usize, col: usize) -> Observation {
        Observation { row, col, value: 1.0 }
    }

    #[test]
    fn rejects_duplicates_and_out_of_range() {
        assert!(ObservationSet::new((2, 2), vec![obs(0, 0), obs(0, 0)], None).is_err());
        assert!(ObservationSet::new((2, 2), vec![obs(2, 0)], None).is_err());
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(ObservationSet::new((2, 2), vec![obs(0, 0)], Some(vec![0.0])).is_err());
        assert!(ObservationSet::new((2, 2), vec![obs(0, 0)], Some(vec![1.5])).is_err());
        assert!(ObservationSet::new((2, 2), vec![obs(0, 0)], Some(vec![1.0])).is_ok());
    }

    #[test]
    fn dense_restriction() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let o = ObservationSet::from_indices(&m, &[(0, 1), (1, 0)], None).unwrap();
        assert_eq!(o.to_dense().values(), &[0.0, 2.0, 3.0, 0.0]);
        assert_eq!(o.mask(), vec![false, true, true, false]);
        let other = ObservationSet::from_indices(&m, &[(0, 1)], None).unwrap();
        assert!(o.union(&other).is_err());
    }
}
