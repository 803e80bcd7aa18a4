#![allow(dead_code)]

use levcomp::svd::LowRankFactorization;
use levcomp::DenseMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(n1: usize, n2: usize, g: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n1).map(|_| (0..n2).map(|_| g.sample(StandardNormal)).collect()).collect()
}

pub fn to_dense(a: &[Vec<f64>]) -> DenseMatrix {
    DenseMatrix::from_rows(a).unwrap()
}

pub fn to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.n_rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Modified Gram-Schmidt on the columns of an n×r array, applied twice.
pub fn orthonormal_columns(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let r = a[0].len();
    let mut q = a.to_vec();
    for _ in 0..2 {
        for k in 0..r {
            for j in 0..k {
                let d: f64 = (0..n).map(|i| q[i][k] * q[i][j]).sum();
                for i in 0..n {
                    q[i][k] -= d * q[i][j];
                }
            }
            let norm: f64 = (0..n).map(|i| q[i][k] * q[i][k]).sum::<f64>().sqrt();
            for row in q.iter_mut() {
                row[k] /= norm;
            }
        }
    }
    q
}

pub fn random_factorization(n1: usize, n2: usize, r: usize, g: &mut ChaCha8Rng) -> LowRankFactorization {
    let u = orthonormal_columns(&gaussian(n1, r, g));
    let v = orthonormal_columns(&gaussian(n2, r, g));
    LowRankFactorization::from_subspaces(to_dense(&u), to_dense(&v)).unwrap()
}

/// Random factorization whose `U` rows have power-law magnitudes, so leverage
/// scores are far from uniform.
pub fn skewed_factorization(n: usize, r: usize, g: &mut ChaCha8Rng) -> LowRankFactorization {
    let mut u = gaussian(n, r, g);
    for (i, row) in u.iter_mut().enumerate() {
        let d = ((i + 1) as f64).powf(-0.7);
        row.iter_mut().for_each(|x| *x *= d);
    }
    let u = orthonormal_columns(&u);
    let v = orthonormal_columns(&gaussian(n, r, g));
    LowRankFactorization::from_subspaces(to_dense(&u), to_dense(&v)).unwrap()
}

/// One-sided Jacobi SVD; singular values in decreasing order.
pub fn jacobi_singular_values(a: &[Vec<f64>]) -> Vec<f64> {
    let (m, n) = (a.len(), a[0].len());
    if n > m {
        let t: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect();
        return jacobi_singular_values(&t);
    }
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[i][j]).collect()).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (cols[p][i], cols[q][i]);
                    cols[p][i] = c * x - s * y;
                    cols[q][i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n).map(|i| (0..m).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect()).collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| (0..a.len()).map(|i| a[i][j]).collect()).collect()
}

/// `P_T` written out entrywise from the projectors `UUᵀ` and `VVᵀ`.
pub fn tangent_projection(f: &LowRankFactorization, z: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let u = to_rows(f.u());
    let v = to_rows(f.v());
    let pu = matmul(&u, &transpose(&u));
    let pv = matmul(&v, &transpose(&v));
    let a = matmul(&pu, z);
    let b = matmul(z, &pv);
    let c = matmul(&a, &pv);
    (0..z.len()).map(|i| (0..z[0].len()).map(|j| a[i][j] + b[i][j] - c[i][j]).collect()).collect()
}

pub fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs())).fold(0.0, f64::max)
}

/// The operator `Z ↦ P_T R_Ω P_T Z − P_T Z` as an explicit
/// `(n1 n2) × (n1 n2)` matrix in the row-major entry basis, built from
/// [`tangent_projection`] one basis matrix at a time.
pub fn explicit_tangent_operator(f: &LowRankFactorization, inv_p: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n1, n2) = (inv_p.len(), inv_p[0].len());
    let d = n1 * n2;
    let mut op = vec![vec![0.0; d]; d];
    for k in 0..d {
        let mut e = vec![vec![0.0; n2]; n1];
        e[k / n2][k % n2] = 1.0;
        let pe = tangent_projection(f, &e);
        let rpe: Vec<Vec<f64>> =
            pe.iter().zip(inv_p).map(|(a, w)| a.iter().zip(w).map(|(x, y)| x * y).collect()).collect();
        let out = tangent_projection(f, &rpe);
        for l in 0..d {
            op[l][k] = out[l / n2][l % n2] - pe[l / n2][l % n2];
        }
    }
    op
}
