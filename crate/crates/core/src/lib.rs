//! Testing conditional mean independence `E(Y | X, Z) = E(Y | Z)` with the
//! martingale difference divergence.
//!
//! When `E(Y | Z)` is linear in `Z`, the hypothesis is equivalent to
//! `E(V | U) = 0` with `V = Y − E(Y | Z)` and `U = (X, Z)`. The LinMDD test
//! estimates `V` by least-squares residuals and measures the conditional mean
//! dependence of those residuals on `U` with the empirical martingale
//! difference divergence, calibrated by permuting the rows of `X`.
//!
//! ```
//! use linmdd_core::{linmdd_test, Matrix, PermutationPlan, Sample};
//!
//! let z = Matrix::column_vector(&[0.1, -0.4, 1.2, 0.8, -1.1, 0.3, 0.0, 2.0]).unwrap();
//! let x = Matrix::column_vector(&[1.0, 0.5, -0.3, 0.2, 0.9, -1.4, 0.6, -0.1]).unwrap();
//! let y = Matrix::from_fn(8, 1, |i, _| -z.get(i, 0) + x.get(i, 0).powi(2)).unwrap();
//! let sample = Sample::new(x, y, z).unwrap();
//!
//! let plan = PermutationPlan::new(99, 42).unwrap();
//! let report = linmdd_test(&sample, &plan, 0.05, true).unwrap();
//! assert!((0.0..=1.0).contains(&report.p_value));
//! ```

pub mod error;
pub mod finance;
pub mod inference;
pub mod kernel;
pub mod matrix;
pub mod regression;
pub mod rng;
pub mod simulation;

pub use error::{Error, Result};
pub use inference::{
    linmdd_test, linmdd_test_with, mdd_test, partial_f_test, permutation_pvalue, Decision,
    PermutationPlan, TestKind, TestReport,
};
pub use kernel::{
    double_center, half_squared_distances, mdd, mdd_squared, mdd_squared_from_centered,
    pairwise_distances, CenteredKind, CenteredMatrix,
};
pub use matrix::{Matrix, Sample};
pub use regression::{fit_ols, fit_ridge, residualize, FitMethod, FittedLinearModel};
pub use simulation::{ModelSpec, PowerRow, PowerTable};
