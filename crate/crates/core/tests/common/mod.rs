//! Test-only oracles, written straight from the definitions and sharing no
//! code with the library's numerical paths.
#![allow(dead_code)]

use linmdd_core::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    Matrix::new(rows, cols, data).unwrap()
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `(1/n²) Σ_ij A_ij B_ij` with every mean recomputed inside the loop: O(n⁴).
pub fn naive_mdd_squared(x: &Matrix, y: &Matrix) -> f64 {
    let n = x.rows();
    let nf = n as f64;
    let a = |i: usize, j: usize| norm(x.row(i), x.row(j));
    let b = |i: usize, j: usize| 0.5 * norm(y.row(i), y.row(j)).powi(2);
    let centered = |f: &dyn Fn(usize, usize) -> f64, i: usize, j: usize| {
        let row: f64 = (0..n).map(|k| f(i, k)).sum::<f64>() / nf;
        let col: f64 = (0..n).map(|k| f(k, j)).sum::<f64>() / nf;
        let all: f64 = (0..n)
            .flat_map(|k| (0..n).map(move |l| (k, l)))
            .map(|(k, l)| f(k, l))
            .sum::<f64>()
            / (nf * nf);
        f(i, j) - row - col + all
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += centered(&a, i, j) * centered(&b, i, j);
        }
    }
    total / (nf * nf)
}

/// Solves `(ZᵀZ) Bᵀ = ZᵀY` by Gaussian elimination with partial pivoting and
/// returns the coefficients as q rows of length r.
pub fn normal_equations(y: &Matrix, z: &Matrix) -> Vec<Vec<f64>> {
    let (n, r, q) = (z.rows(), z.cols(), y.cols());
    let mut aug = vec![vec![0.0; r + q]; r];
    for a in 0..r {
        for b in 0..r {
            aug[a][b] = (0..n).map(|i| z.get(i, a) * z.get(i, b)).sum();
        }
        for k in 0..q {
            aug[a][r + k] = (0..n).map(|i| z.get(i, a) * y.get(i, k)).sum();
        }
    }
    for c in 0..r {
        let p = (c..r)
            .max_by(|&i, &j| aug[i][c].abs().partial_cmp(&aug[j][c].abs()).unwrap())
            .unwrap();
        aug.swap(c, p);
        for i in 0..r {
            if i != c {
                let f = aug[i][c] / aug[c][c];
                for k in c..r + q {
                    aug[i][k] -= f * aug[c][k];
                }
            }
        }
    }
    (0..q)
        .map(|k| (0..r).map(|a| aug[a][r + k] / aug[a][a]).collect())
        .collect()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// One-sample Kolmogorov–Smirnov distance to Uniform(0, 1).
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
