//! Least-squares estimation of the coefficient matrix in `Y = coef · Z + V`
//! and the residuals `V̂ = Y − coef̂ · Z` that feed the test.
//!
//! Both solvers work from a singular value decomposition of the design and
//! never form an explicit inverse of the Gram matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, Sample};

/// Designs whose smallest singular value is below this fraction of the
/// largest are rejected by [`fit_ols`].
pub const RANK_TOL: f64 = 1e-10;

/// A residual column no larger than this fraction of its response column is
/// round-off from an exact fit and is set to zero.
pub const EXACT_FIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum FitMethod {
    Ols,
    Ridge { lambda: f64 },
}

/// Result of regressing `Y` (n×q) on `Z` (n×r).
#[derive(Debug, Clone, PartialEq)]
pub struct FittedLinearModel {
    /// q×r; row `k` holds the coefficients of response `k`.
    pub coefficients: Matrix,
    /// n×q.
    pub residuals: Matrix,
    /// n×q; row `i` is `coef̂ · Z_i`.
    pub fitted: Matrix,
    pub method: FitMethod,
}

fn check_rows(y: &Matrix, z: &Matrix) -> Result<()> {
    if y.rows() != z.rows() {
        return Err(Error::DimensionMismatch(format!(
            "Y has {} rows, Z has {}",
            y.rows(),
            z.rows()
        )));
    }
    Ok(())
}

fn assemble(
    y: &Matrix,
    z: &Matrix,
    coef_t: &DMatrix<f64>,
    method: FitMethod,
) -> Result<FittedLinearModel> {
    let fitted = z.to_nalgebra() * coef_t;
    let mut fitted = Matrix::from_nalgebra(&fitted)?.into_vec();
    let (n, q) = (y.rows(), y.cols());
    let mut residuals: Vec<f64> = y.as_slice().iter().zip(&fitted).map(|(a, b)| a - b).collect();
    for k in 0..q {
        let y_scale = (0..n).map(|i| y.get(i, k).abs()).fold(0.0, f64::max);
        let r_scale = (0..n).map(|i| residuals[i * q + k].abs()).fold(0.0, f64::max);
        if r_scale <= EXACT_FIT_TOL * y_scale {
            for i in 0..n {
                residuals[i * q + k] = 0.0;
                fitted[i * q + k] = y.get(i, k);
            }
        }
    }
    let fitted = Matrix::new(n, q, fitted)?;
    let residuals = Matrix::new(n, q, residuals)?;
    Ok(FittedLinearModel {
        coefficients: Matrix::from_nalgebra(&coef_t.transpose())?,
        residuals,
        fitted,
        method,
    })
}

/// Ordinary least squares. Fails with [`Error::RankDeficient`] when `Z` does
/// not have full column rank (within [`RANK_TOL`]) or `n ≤ r`.
pub fn fit_ols(y: &Matrix, z: &Matrix) -> Result<FittedLinearModel> {
    check_rows(y, z)?;
    let (n, r) = (z.rows(), z.cols());
    if n <= r {
        return Err(Error::RankDeficient(format!(
            "{n} observations cannot identify {r} coefficients"
        )));
    }
    let svd = z.to_nalgebra().svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    if !(s_max > 0.0) || s_min < RANK_TOL * s_max {
        return Err(Error::RankDeficient(format!(
            "smallest singular value {s_min:e} is below {RANK_TOL:e} x largest {s_max:e}"
        )));
    }
    let coef_t = svd
        .solve(&y.to_nalgebra(), 0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    assemble(y, z, &coef_t, FitMethod::Ols)
}

/// Ridge regression minimising `Σ|Y_i − coef·Z_i|² + λ‖coef‖²_F`, solved as the
/// augmented least-squares problem `[Z; √λ I] coefᵀ ≈ [Y; 0]`.
pub fn fit_ridge(y: &Matrix, z: &Matrix, lambda: f64) -> Result<FittedLinearModel> {
    check_rows(y, z)?;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "ridge penalty must be positive and finite, got {lambda}"
        )));
    }
    let (n, r, q) = (z.rows(), z.cols(), y.cols());
    let root = lambda.sqrt();
    let mut design = DMatrix::<f64>::zeros(n + r, r);
    design.view_mut((0, 0), (n, r)).copy_from(&z.to_nalgebra());
    for k in 0..r {
        design[(n + k, k)] = root;
    }
    let mut target = DMatrix::<f64>::zeros(n + r, q);
    target.view_mut((0, 0), (n, q)).copy_from(&y.to_nalgebra());
    let coef_t = design
        .svd(true, true)
        .solve(&target, 0.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    assemble(y, z, &coef_t, FitMethod::Ridge { lambda })
}

pub fn fit(y: &Matrix, z: &Matrix, method: FitMethod) -> Result<FittedLinearModel> {
    match method {
        FitMethod::Ols => fit_ols(y, z),
        FitMethod::Ridge { lambda } => fit_ridge(y, z, lambda),
    }
}

/// `Z` with a trailing column of ones.
pub fn append_intercept(z: &Matrix) -> Result<Matrix> {
    if let Some(j) = z.constant_column() {
        return Err(Error::RankDeficient(format!(
            "intercept requested but Z column {j} is already constant"
        )));
    }
    z.hconcat(&Matrix::new(z.rows(), 1, vec![1.0; z.rows()])?)
}

/// Conditioning block `U = (X, Z')` and residuals of `Y` on `Z'`, where `Z'`
/// is `Z` with a ones-column appended when `intercept` is set.
#[derive(Debug, Clone)]
pub struct Residualization {
    pub u: Matrix,
    pub design: Matrix,
    pub model: FittedLinearModel,
}

impl Residualization {
    pub fn residuals(&self) -> &Matrix {
        &self.model.residuals
    }
}

pub fn residualize(sample: &Sample, intercept: bool, method: FitMethod) -> Result<Residualization> {
    let design = if intercept {
        append_intercept(sample.z())?
    } else {
        sample.z().clone()
    };
    let model = fit(sample.y(), &design, method)?;
    let u = sample.x().hconcat(&design)?;
    Ok(Residualization { u, design, model })
}

/// Residual sum of squares of a single-response fit.
pub(crate) fn rss(model: &FittedLinearModel) -> f64 {
    model.residuals.as_slice().iter().map(|v| v * v).sum()
}
