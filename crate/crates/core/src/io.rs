//! Plain-text formats.
//!
//! Matrix: header `n_rows n_cols`, then one line of whitespace-separated
//! values per row. Observations: header `n_rows n_cols m`, then `m` lines
//! `i j value [p]` with 0-based indices. Weights: two lines, the diagonal of
//! `R` then the diagonal of `C`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::observation::{Observation, ObservationSet};
use crate::solver::WeightMatrices;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

/// Non-blank lines with their 1-based line numbers.
fn content_lines<R: BufRead>(reader: R) -> Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((k + 1, line));
        }
    }
    Ok(out)
}

fn numbers<T: std::str::FromStr>(line: usize, text: &str) -> Result<Vec<T>> {
    text.split_whitespace()
        .map(|tok| tok.parse::<T>().map_err(|_| parse_err(line, format!("bad number {tok:?}"))))
        .collect()
}

pub fn read_matrix<R: BufRead>(reader: R) -> Result<DenseMatrix> {
    let lines = content_lines(reader)?;
    let (&(hl, ref header), body) = lines.split_first().ok_or_else(|| parse_err(1, "empty matrix file"))?;
    let dims: Vec<usize> = numbers(hl, header)?;
    let [n1, n2] = dims[..] else {
        return Err(parse_err(hl, "header must be `n_rows n_cols`"));
    };
    if body.len() != n1 {
        return Err(parse_err(hl, format!("expected {n1} rows, found {}", body.len())));
    }
    let mut values = Vec::with_capacity(n1 * n2);
    for (line, text) in body {
        let row: Vec<f64> = numbers(*line, text)?;
        if row.len() != n2 {
            return Err(parse_err(*line, format!("expected {n2} values, found {}", row.len())));
        }
        values.extend(row);
    }
    DenseMatrix::new(n1, n2, values)
}

pub fn write_matrix<W: Write>(m: &DenseMatrix, mut out: W) -> Result<()> {
    writeln!(out, "{} {}", m.n_rows(), m.n_cols())?;
    for i in 0..m.n_rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:e}")).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

/// Reads observations; the `p` column must be present on every line or on
/// none.
pub fn read_observations<R: BufRead>(reader: R) -> Result<ObservationSet> {
    let lines = content_lines(reader)?;
    let (&(hl, ref header), body) = lines.split_first().ok_or_else(|| parse_err(1, "empty observation file"))?;
    let dims: Vec<usize> = numbers(hl, header)?;
    let [n1, n2, count] = dims[..] else {
        return Err(parse_err(hl, "header must be `n_rows n_cols m`"));
    };
    if body.len() != count {
        return Err(parse_err(hl, format!("expected {count} observations, found {}", body.len())));
    }
    let mut entries = Vec::with_capacity(count);
    let mut probs = Vec::with_capacity(count);
    let mut with_p = None;
    for (line, text) in body {
        let toks: Vec<&str> = text.split_whitespace().collect();
        let has_p = match toks.len() {
            3 => false,
            4 => true,
            k => return Err(parse_err(*line, format!("expected 3 or 4 fields, found {k}"))),
        };
        if *with_p.get_or_insert(has_p) != has_p {
            return Err(parse_err(*line, "probability column present on some lines only"));
        }
        let idx = |t: &str| t.parse::<usize>().map_err(|_| parse_err(*line, format!("bad index {t:?}")));
        let val = |t: &str| t.parse::<f64>().map_err(|_| parse_err(*line, format!("bad number {t:?}")));
        entries.push(Observation { row: idx(toks[0])?, col: idx(toks[1])?, value: val(toks[2])? });
        if has_p {
            probs.push(val(toks[3])?);
        }
    }
    ObservationSet::new((n1, n2), entries, with_p.unwrap_or(false).then_some(probs))
}

pub fn write_observations<W: Write>(obs: &ObservationSet, mut out: W) -> Result<()> {
    let (n1, n2) = obs.shape();
    writeln!(out, "{n1} {n2} {}", obs.len())?;
    match obs.probabilities() {
        Some(p) => {
            for (e, p) in obs.entries().iter().zip(p) {
                writeln!(out, "{} {} {:e} {:e}", e.row, e.col, e.value, p)?;
            }
        }
        None => {
            for e in obs.entries() {
                writeln!(out, "{} {} {:e}", e.row, e.col, e.value)?;
            }
        }
    }
    Ok(())
}

pub fn read_weights<R: BufRead>(reader: R) -> Result<WeightMatrices> {
    let lines = content_lines(reader)?;
    let [(l1, row), (l2, col)] = &lines[..] else {
        return Err(parse_err(1, format!("expected 2 lines, found {}", lines.len())));
    };
    WeightMatrices::new(numbers(*l1, row)?, numbers(*l2, col)?)
}

pub fn write_weights<W: Write>(w: &WeightMatrices, mut out: W) -> Result<()> {
    let join = |xs: &[f64]| xs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
    writeln!(out, "{}", join(w.row()))?;
    writeln!(out, "{}", join(w.col()))?;
    Ok(())
}
