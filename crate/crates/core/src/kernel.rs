//! Pairwise distance matrices, double centering and the empirical martingale
//! difference divergence
//!
//! ```text
//! MDD_n²(Y | X) = (1/n²) Σ_ij A_ij B_ij
//! ```
//!
//! where `A` is the double-centered matrix of `a_ij = |X_i − X_j|` and `B` the
//! double-centered matrix of `b_ij = ½|Y_i − Y_j|²`. The value is zero when
//! either block is constant and nonnegative for every input. The population
//! quantity (a weighted L² norm over characteristic functions) is never
//! evaluated here.
//!
//! All reductions over the n² products use Neumaier compensated summation in
//! a fixed row-major order, so results do not depend on how callers schedule
//! work across threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Relative threshold below which a negative statistic is treated as round-off.
pub const NEGATIVE_ROUNDOFF_TOL: f64 = 1e-12;

/// Which raw matrix a [`CenteredMatrix`] was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CenteredKind {
    /// From Euclidean distances `|S_i − S_j|`.
    DistanceCentered,
    /// From half squared distances `½|S_i − S_j|²`.
    HalfSquaredCentered,
}

/// A symmetric n×n matrix with zero row and column sums.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix {
    n: usize,
    data: Vec<f64>,
    kind: CenteredKind,
}

impl CenteredMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> CenteredKind {
        self.kind
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        let mut acc = NeumaierSum::default();
        for v in &self.data {
            acc.add(v * v);
        }
        acc.total().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest deviation from symmetry and from zero row/column sums, as a
    /// pair `(asymmetry, worst_line_sum)`.
    pub fn invariant_residuals(&self) -> (f64, f64) {
        let n = self.n;
        let mut asym = 0.0_f64;
        let mut worst = 0.0_f64;
        for i in 0..n {
            let mut row = NeumaierSum::default();
            let mut col = NeumaierSum::default();
            for j in 0..n {
                asym = asym.max((self.get(i, j) - self.get(j, i)).abs());
                row.add(self.get(i, j));
                col.add(self.get(j, i));
            }
            worst = worst.max(row.total().abs()).max(col.total().abs());
        }
        (asym, worst)
    }

    /// Checks symmetry and zero line sums within `tol × n × max|entry|`.
    pub fn satisfies_invariants(&self, tol: f64) -> bool {
        let bound = tol * self.n as f64 * self.max_abs();
        let (asym, worst) = self.invariant_residuals();
        asym <= bound && worst <= bound
    }
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

fn require_n(s: &Matrix) -> Result<usize> {
    let n = s.rows();
    if n < 2 {
        return Err(Error::TooFewObservations { n, min: 2 });
    }
    Ok(n)
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row-major n×n squared Euclidean distances; each pair is computed once and
/// mirrored, so the result is exactly symmetric with a zero diagonal.
pub(crate) fn squared_distances(s: &Matrix) -> Vec<f64> {
    let n = s.rows();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = squared_distance(s.row(i), s.row(j));
            out[i * n + j] = d;
            out[j * n + i] = d;
        }
    }
    out
}

/// `output(i, j) = |row_i − row_j|`.
pub fn pairwise_distances(s: &Matrix) -> Result<Matrix> {
    let n = require_n(s)?;
    let data = squared_distances(s).into_iter().map(f64::sqrt).collect();
    Ok(Matrix::from_parts_unchecked(n, n, data))
}

/// `output(i, j) = ½|row_i − row_j|²`.
pub fn half_squared_distances(s: &Matrix) -> Result<Matrix> {
    let n = require_n(s)?;
    let data = squared_distances(s).into_iter().map(|d| 0.5 * d).collect();
    Ok(Matrix::from_parts_unchecked(n, n, data))
}

/// `A_ij = a_ij − ā_i· − ā_·j + ā_··`.
pub fn double_center(d: &Matrix, kind: CenteredKind) -> Result<CenteredMatrix> {
    let n = d.rows();
    if d.cols() != n {
        return Err(Error::NotSquare {
            rows: d.rows(),
            cols: d.cols(),
        });
    }
    let sym_tol = 1e-12 * d.max_abs();
    for i in 0..n {
        for j in (i + 1)..n {
            if (d.get(i, j) - d.get(j, i)).abs() > sym_tol {
                return Err(Error::NotSymmetric { row: i, col: j });
            }
        }
    }

    let nf = n as f64;
    let mut row_means = vec![0.0; n];
    let mut col_means = vec![0.0; n];
    let mut grand = NeumaierSum::default();
    for i in 0..n {
        let mut row = NeumaierSum::default();
        let mut col = NeumaierSum::default();
        for j in 0..n {
            row.add(d.get(i, j));
            col.add(d.get(j, i));
        }
        row_means[i] = row.total() / nf;
        col_means[i] = col.total() / nf;
        grand.add(row.total());
    }
    let grand_mean = grand.total() / (nf * nf);

    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            data.push(d.get(i, j) - row_means[i] - col_means[j] + grand_mean);
        }
    }
    Ok(CenteredMatrix { n, data, kind })
}

/// Applies the round-off policy: values in `(−tol·scale, 0)` become 0, more
/// negative values are an error.
pub(crate) fn clamp_statistic(value: f64, scale: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value)
    } else if value > -NEGATIVE_ROUNDOFF_TOL * scale {
        Ok(0.0)
    } else {
        Err(Error::NegativeStatistic { value, scale })
    }
}

/// Unclamped `(1/n²) Σ A_ij B_ij` and its Cauchy–Schwarz scale `‖A‖‖B‖/n²`.
pub(crate) fn centered_inner_raw(a: &CenteredMatrix, b: &CenteredMatrix) -> (f64, f64) {
    let n2 = (a.n * a.n) as f64;
    let mut acc = NeumaierSum::default();
    for (x, y) in a.data.iter().zip(&b.data) {
        acc.add(x * y);
    }
    let scale = a.frobenius_norm() * b.frobenius_norm() / n2;
    (acc.total() / n2, scale)
}

/// `MDD_n²` from precomputed centered matrices.
///
/// `a` must be distance-centered (from the conditioning block) and `b`
/// half-squared-centered (from the response block).
pub fn mdd_squared_from_centered(a: &CenteredMatrix, b: &CenteredMatrix) -> Result<f64> {
    if a.kind != CenteredKind::DistanceCentered {
        return Err(Error::KindMismatch(
            "first argument must be distance-centered".into(),
        ));
    }
    if b.kind != CenteredKind::HalfSquaredCentered {
        return Err(Error::KindMismatch(
            "second argument must be half-squared-centered".into(),
        ));
    }
    if a.n != b.n {
        return Err(Error::DimensionMismatch(format!(
            "centered matrices have n = {} and n = {}",
            a.n, b.n
        )));
    }
    let (value, scale) = centered_inner_raw(a, b);
    clamp_statistic(value, scale)
}

/// Double-centered distance matrix of the conditioning block.
pub fn center_distances(x: &Matrix) -> Result<CenteredMatrix> {
    double_center(&pairwise_distances(x)?, CenteredKind::DistanceCentered)
}

/// Double-centered half-squared-distance matrix of the response block.
pub fn center_half_squared(y: &Matrix) -> Result<CenteredMatrix> {
    double_center(&half_squared_distances(y)?, CenteredKind::HalfSquaredCentered)
}

fn check_pair(x: &Matrix, y: &Matrix) -> Result<()> {
    if x.rows() != y.rows() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows, Y has {}",
            x.rows(),
            y.rows()
        )));
    }
    require_n(x).map(|_| ())
}

/// Empirical squared martingale difference divergence of `y` given `x`.
pub fn mdd_squared(x: &Matrix, y: &Matrix) -> Result<f64> {
    check_pair(x, y)?;
    mdd_squared_from_centered(&center_distances(x)?, &center_half_squared(y)?)
}

/// Square root of [`mdd_squared`].
pub fn mdd(x: &Matrix, y: &Matrix) -> Result<f64> {
    mdd_squared(x, y).map(f64::sqrt)
}

/// Reusable state for recomputing `MDD_n²(V | U)` when the rows of one block
/// of `U = (X, Z)` are permuted and everything else stays fixed.
///
/// The centered response matrix is built once. For each permutation `π` the
/// conditioning distances are rebuilt as
/// `a_ij = sqrt(|X_π(i) − X_π(j)|² + |Z_i − Z_j|²)`, which cannot be obtained
/// by permuting a precomputed `U` distance matrix because `Z` is not permuted.
/// Since `B` has zero line sums, `Σ A_ij B_ij = Σ a_ij B_ij`, so `a` itself is
/// never centered.
#[derive(Debug, Clone)]
pub struct PermutationKernel {
    n: usize,
    permuted_sq: Vec<f64>,
    fixed_sq: Option<Vec<f64>>,
    response: CenteredMatrix,
}

impl PermutationKernel {
    /// `permuted` is the block whose rows are shuffled, `fixed` the optional
    /// block of `U` that keeps its order, `response` the block measured for
    /// conditional mean dependence.
    pub fn new(permuted: &Matrix, fixed: Option<&Matrix>, response: &Matrix) -> Result<Self> {
        check_pair(permuted, response)?;
        if let Some(z) = fixed {
            check_pair(z, response)?;
        }
        Ok(Self {
            n: permuted.rows(),
            permuted_sq: squared_distances(permuted),
            fixed_sq: fixed.map(squared_distances),
            response: center_half_squared(response)?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The statistic on the unpermuted sample.
    pub fn observed(&self) -> Result<f64> {
        let identity: Vec<usize> = (0..self.n).collect();
        self.statistic(&identity)
    }

    /// The statistic after replacing row `i` of the permuted block by row
    /// `order[i]`.
    pub fn statistic(&self, order: &[usize]) -> Result<f64> {
        let n = self.n;
        if order.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "permutation has length {}, expected {n}",
                order.len()
            )));
        }
        let b = &self.response.data;
        let mut acc = NeumaierSum::default();
        let mut a_norm2 = NeumaierSum::default();
        for i in 0..n {
            let pi = order[i] * n;
            for j in (i + 1)..n {
                let mut d2 = self.permuted_sq[pi + order[j]];
                if let Some(z) = &self.fixed_sq {
                    d2 += z[i * n + j];
                }
                let a = d2.sqrt();
                acc.add(a * b[i * n + j]);
                a_norm2.add(a * a);
            }
        }
        let n2 = (n * n) as f64;
        // Off-diagonal pairs appear twice; the diagonal of a is zero.
        let value = 2.0 * acc.total() / n2;
        let scale = (2.0 * a_norm2.total()).sqrt() * self.response.frobenius_norm() / n2;
        clamp_statistic(value, scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn col(v: &[f64]) -> Matrix {
        Matrix::column_vector(v).unwrap()
    }

    #[test]
    fn one_dimensional_distances() {
        let d = pairwise_distances(&col(&[0.0, 3.0])).unwrap();
        assert_eq!(d.as_slice(), &[0.0, 3.0, 3.0, 0.0]);
    }

    #[test]
    fn identical_rows_give_zero_distances() {
        let s = Matrix::from_rows(&[[1.5, -2.0]; 4]).unwrap();
        assert!(pairwise_distances(&s).unwrap().as_slice().iter().all(|&v| v == 0.0));
        assert!(half_squared_distances(&s)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn pythagorean_distance() {
        let s = Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(pairwise_distances(&s).unwrap().get(0, 1), 5.0);
    }

    #[test]
    fn half_squared_examples() {
        assert_eq!(half_squared_distances(&col(&[0.0, 2.0])).unwrap().get(1, 0), 2.0);
        let s = Matrix::from_rows(&[[1.0, 1.0], [4.0, 5.0]]).unwrap();
        assert_eq!(half_squared_distances(&s).unwrap().get(0, 1), 12.5);
    }

    #[test]
    fn single_row_rejected() {
        assert!(matches!(
            pairwise_distances(&col(&[1.0])),
            Err(Error::TooFewObservations { n: 1, min: 2 })
        ));
        assert!(half_squared_distances(&col(&[1.0])).is_err());
    }

    #[test]
    fn two_by_two_centering() {
        let d = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let c = double_center(&d, CenteredKind::DistanceCentered).unwrap();
        assert_eq!(c.as_slice(), &[-0.5, 0.5, 0.5, -0.5]);
        assert_eq!(c.kind(), CenteredKind::DistanceCentered);
    }

    #[test]
    fn centering_annihilates_constants() {
        for v in [0.0, 3.25] {
            let d = Matrix::new(3, 3, vec![v; 9]).unwrap();
            let c = double_center(&d, CenteredKind::DistanceCentered).unwrap();
            assert!(c.as_slice().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn centering_rejects_bad_shapes() {
        let d = Matrix::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(
            double_center(&d, CenteredKind::DistanceCentered),
            Err(Error::NotSquare { .. })
        ));
        let d = Matrix::from_rows(&[[0.0, 1.0], [2.0, 0.0]]).unwrap();
        assert!(matches!(
            double_center(&d, CenteredKind::DistanceCentered),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn toy_statistic_is_one_half() {
        assert_eq!(mdd_squared(&col(&[0.0, 1.0]), &col(&[0.0, 2.0])).unwrap(), 0.5);
        let a = center_distances(&col(&[0.0, 1.0])).unwrap();
        let b = center_half_squared(&col(&[0.0, 2.0])).unwrap();
        assert_eq!(b.as_slice(), &[-1.0, 1.0, 1.0, -1.0]);
        assert_eq!(mdd_squared_from_centered(&a, &b).unwrap(), 0.5);
        assert_eq!(mdd(&col(&[0.0, 1.0]), &col(&[0.0, 2.0])).unwrap(), 0.5_f64.sqrt());
    }

    #[test]
    fn constant_blocks_give_zero() {
        let x = col(&[0.3, -1.0, 2.0, 5.0]);
        let c = col(&[7.0; 4]);
        assert_eq!(mdd_squared(&x, &c).unwrap(), 0.0);
        assert_eq!(mdd_squared(&c, &x).unwrap(), 0.0);
    }

    #[test]
    fn zero_centered_argument_gives_zero() {
        let a = center_distances(&col(&[1.0; 3])).unwrap();
        let b = center_half_squared(&col(&[0.0, 1.0, 4.0])).unwrap();
        assert_eq!(mdd_squared_from_centered(&a, &b).unwrap(), 0.0);
        let a = center_distances(&col(&[0.0, 1.0, 4.0])).unwrap();
        let b = center_half_squared(&col(&[2.0; 3])).unwrap();
        assert_eq!(mdd_squared_from_centered(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn both_code_paths_agree() {
        let x = col(&[0.0, 1.0, 2.0]);
        let a = center_distances(&x).unwrap();
        let b = center_half_squared(&x).unwrap();
        assert_relative_eq!(
            mdd_squared_from_centered(&a, &b).unwrap(),
            mdd_squared(&x, &x).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn kind_and_size_mismatch_rejected() {
        let a = center_distances(&col(&[0.0, 1.0, 2.0])).unwrap();
        let b = center_half_squared(&col(&[0.0, 1.0])).unwrap();
        assert!(matches!(
            mdd_squared_from_centered(&a, &b),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            mdd_squared_from_centered(&a, &a),
            Err(Error::KindMismatch(_))
        ));
    }

    #[test]
    fn mismatched_n_rejected() {
        assert!(matches!(
            mdd_squared(&col(&[0.0, 1.0, 2.0]), &col(&[0.0, 1.0])),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn clamp_policy() {
        assert_eq!(clamp_statistic(-1e-14, 1.0).unwrap(), 0.0);
        assert_eq!(clamp_statistic(0.25, 1.0).unwrap(), 0.25);
        assert!(matches!(
            clamp_statistic(-1e-6, 1.0),
            Err(Error::NegativeStatistic { .. })
        ));
    }

    #[test]
    fn permutation_kernel_matches_direct_statistic() {
        let x = Matrix::from_rows(&[[0.1, 2.0], [1.3, -0.4], [-0.7, 0.9], [2.2, 1.1], [0.0, -1.5]])
            .unwrap();
        let z = col(&[0.5, -1.0, 0.25, 1.75, -0.3]);
        let v = col(&[1.0, -0.2, 0.4, 2.5, -1.1]);
        let kernel = PermutationKernel::new(&x, Some(&z), &v).unwrap();
        let order = [3, 0, 4, 1, 2];
        let u = x.select_rows(&order).hconcat(&z).unwrap();
        assert_relative_eq!(
            kernel.statistic(&order).unwrap(),
            mdd_squared(&u, &v).unwrap(),
            max_relative = 1e-12
        );
        let u = x.hconcat(&z).unwrap();
        assert_relative_eq!(
            kernel.observed().unwrap(),
            mdd_squared(&u, &v).unwrap(),
            max_relative = 1e-12
        );
        assert!(kernel.statistic(&[0, 1]).is_err());
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let mut s = NeumaierSum::default();
        for v in [1.0, 1e100, 1.0, -1e100] {
            s.add(v);
        }
        assert_eq!(s.total(), 2.0);
    }
}
