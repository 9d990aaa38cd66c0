//! Permutation inference for conditional mean independence.
//!
//! [`linmdd_test`] tests `E(Y | X, Z) = E(Y | Z)` under a linear model for
//! `E(Y | Z)`: the residuals `V̂` of `Y` on `Z` are computed once, the observed
//! statistic is `MDD_n²(V̂ | U)` with `U = (X, Z)`, and each replicate shuffles
//! only the rows of `X` inside `U`. `Y`, `Z` and `V̂` are never touched by a
//! permutation, so the coefficients are not refitted.
//!
//! The asymptotic theory assumes i.i.d. rows, finite second moments of
//! distances in `U`, bounded fourth cross-moments of `Z` and `V` increments,
//! and a root-n consistent coefficient estimate. None of these are checked at
//! runtime.
//!
//! [`mdd_test`] is the unconditional test of `E(Y | X) = E(Y)` and
//! [`partial_f_test`] the classical nested-regression F-test, both kept as
//! baselines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::kernel::PermutationKernel;
use crate::matrix::{Matrix, Sample};
use crate::regression::{self, FitMethod};
use crate::rng;

/// Minimum sample size accepted by the permutation tests.
pub const MIN_TEST_N: usize = 4;

/// Seeded description of the permutations used by a test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationPlan {
    num_permutations: usize,
    seed: u64,
    continuity_correction: bool,
}

impl PermutationPlan {
    pub fn new(num_permutations: usize, seed: u64) -> Result<Self> {
        if num_permutations == 0 {
            return Err(Error::InvalidPlan(
                "number of permutations must be at least 1".into(),
            ));
        }
        Ok(Self {
            num_permutations,
            seed,
            continuity_correction: false,
        })
    }

    /// Use `(1 + #{T_b ≥ T}) / (1 + B)` instead of `#{T_b ≥ T} / B`.
    pub fn with_continuity_correction(mut self, on: bool) -> Self {
        self.continuity_correction = on;
        self
    }

    pub fn num_permutations(&self) -> usize {
        self.num_permutations
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn continuity_correction(&self) -> bool {
        self.continuity_correction
    }

    /// Permutation used by replicate `b` (reads random stream `b`).
    pub fn permutation(&self, b: usize, n: usize) -> Vec<usize> {
        rng::permutation(self.seed, b as u64, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "linmdd")]
    LinMdd,
    #[serde(rename = "mdd")]
    Mdd,
    #[serde(rename = "partial-f")]
    PartialF,
}

impl TestKind {
    pub const ALL: [TestKind; 3] = [TestKind::LinMdd, TestKind::Mdd, TestKind::PartialF];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::LinMdd => "linmdd",
            TestKind::Mdd => "mdd",
            TestKind::PartialF => "partial-f",
        }
    }
}

impl std::fmt::Display for TestKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TestKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TestKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown test {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Reject,
    FailToReject,
}

impl Decision {
    pub fn at(p_value: f64, alpha: f64) -> Self {
        if p_value < alpha {
            Decision::Reject
        } else {
            Decision::FailToReject
        }
    }
}

/// Outcome of one hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: TestKind,
    /// Observed `MDD_n²`, or the F statistic.
    pub statistic: f64,
    /// Permutation statistics in replicate order; empty for the F-test.
    pub replicates: Vec<f64>,
    pub p_value: f64,
    #[serde(rename = "B")]
    pub num_permutations: usize,
    pub seed: u64,
    pub alpha: f64,
    pub decision: Decision,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < MIN_TEST_N {
        Err(Error::TooFewObservations { n, min: MIN_TEST_N })
    } else {
        Ok(())
    }
}

/// `#{replicates ≥ observed} / B`; ties count toward the p-value.
pub fn permutation_pvalue(observed: f64, replicates: &[f64]) -> Result<f64> {
    if replicates.is_empty() {
        return Err(Error::EmptyReplicates);
    }
    Ok(exceedances(observed, replicates) as f64 / replicates.len() as f64)
}

/// `(1 + #{replicates ≥ observed}) / (1 + B)`.
pub fn corrected_permutation_pvalue(observed: f64, replicates: &[f64]) -> Result<f64> {
    if replicates.is_empty() {
        return Err(Error::EmptyReplicates);
    }
    Ok((1 + exceedances(observed, replicates)) as f64 / (1 + replicates.len()) as f64)
}

fn exceedances(observed: f64, replicates: &[f64]) -> usize {
    replicates.iter().filter(|&&r| r >= observed).count()
}

/// Evaluates every replicate of `plan`. Replicates run on the rayon pool;
/// results come back in replicate order.
pub fn permutation_replicates(kernel: &PermutationKernel, plan: &PermutationPlan) -> Result<Vec<f64>> {
    let n = kernel.n();
    (0..plan.num_permutations())
        .into_par_iter()
        .map(|b| kernel.statistic(&plan.permutation(b, n)))
        .collect()
}

fn permutation_report(
    test: TestKind,
    kernel: &PermutationKernel,
    plan: &PermutationPlan,
    alpha: f64,
) -> Result<TestReport> {
    let statistic = kernel.observed()?;
    let replicates = permutation_replicates(kernel, plan)?;
    let p_value = if plan.continuity_correction() {
        corrected_permutation_pvalue(statistic, &replicates)?
    } else {
        permutation_pvalue(statistic, &replicates)?
    };
    Ok(TestReport {
        test,
        statistic,
        replicates,
        p_value,
        num_permutations: plan.num_permutations(),
        seed: plan.seed(),
        alpha,
        decision: Decision::at(p_value, alpha),
    })
}

/// LinMDD test with ordinary least squares residualization.
pub fn linmdd_test(sample: &Sample, plan: &PermutationPlan, alpha: f64, intercept: bool) -> Result<TestReport> {
    linmdd_test_with(sample, plan, alpha, intercept, FitMethod::Ols)
}

/// LinMDD test with an explicit regression method.
pub fn linmdd_test_with(
    sample: &Sample,
    plan: &PermutationPlan,
    alpha: f64,
    intercept: bool,
    method: FitMethod,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    check_n(sample.n())?;
    let fit = regression::residualize(sample, intercept, method)?;
    let kernel = PermutationKernel::new(sample.x(), Some(&fit.design), fit.residuals())?;
    permutation_report(TestKind::LinMdd, &kernel, plan, alpha)
}

/// Permutation test of `E(Y | X) = E(Y)` based on `MDD_n²(Y | X)`.
pub fn mdd_test(x: &Matrix, y: &Matrix, plan: &PermutationPlan, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    check_n(x.rows())?;
    let kernel = PermutationKernel::new(x, None, y)?;
    permutation_report(TestKind::Mdd, &kernel, plan, alpha)
}

/// Partial F-test of the `X` coefficients in the regression of a single
/// response on `(X, Z)`:
///
/// ```text
/// F = [(RSS_reduced − RSS_full) / p] / [RSS_full / (n − p − r')]
/// ```
///
/// with `r'` the number of columns of `Z` after the optional intercept. The
/// statistic is infinite when the full model fits exactly but the reduced one
/// does not.
pub fn partial_f_test(sample: &Sample, alpha: f64, intercept: bool) -> Result<TestReport> {
    check_alpha(alpha)?;
    let q = sample.y().cols();
    if q != 1 {
        return Err(Error::UnsupportedResponseDim(q));
    }
    let reduced = regression::residualize(sample, intercept, FitMethod::Ols)?;
    let full_design = &reduced.u;
    let n = sample.n();
    let p = sample.x().cols();
    let k = full_design.cols();
    if n <= k {
        return Err(Error::RankDeficient(format!(
            "{n} observations cannot identify {k} coefficients"
        )));
    }
    let full = regression::fit_ols(sample.y(), full_design)?;
    let rss_reduced = regression::rss(&reduced.model);
    let rss_full = regression::rss(&full);
    let df1 = p as f64;
    let df2 = (n - k) as f64;
    let numerator = (rss_reduced - rss_full).max(0.0) / df1;
    let denominator = rss_full / df2;

    let (statistic, p_value) = if numerator == 0.0 {
        (0.0, 1.0)
    } else if denominator == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = numerator / denominator;
        let dist = FisherSnedecor::new(df1, df2)
            .map_err(|e| Error::InvalidArgument(format!("F distribution: {e}")))?;
        (f, dist.sf(f))
    };
    Ok(TestReport {
        test: TestKind::PartialF,
        statistic,
        replicates: Vec::new(),
        p_value,
        num_permutations: 0,
        seed: 0,
        alpha,
        decision: Decision::at(p_value, alpha),
    })
}

/// Runs `test` on `sample`; the MDD baseline ignores `Z`.
pub fn run_test(
    test: TestKind,
    sample: &Sample,
    plan: &PermutationPlan,
    alpha: f64,
    intercept: bool,
) -> Result<TestReport> {
    match test {
        TestKind::LinMdd => linmdd_test(sample, plan, alpha, intercept),
        TestKind::Mdd => mdd_test(sample.x(), sample.y(), plan, alpha),
        TestKind::PartialF => partial_f_test(sample, alpha, intercept),
    }
}
