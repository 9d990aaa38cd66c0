//! Monte Carlo size and power study.
//!
//! Data follow `Y = −Z + b·Z³ + f(X) + ε` with `Z, X ~ N(0, 1)` and
//! `ε ~ N(0, 4)` (standard deviation 2), all independent, and
//! `f(x) = c·x` or `f(x) = sin(cπx)`. The four catalogued models are
//!
//! | id | b | f        | c grid             |
//! |----|---|----------|--------------------|
//! | 1  | 0 | c·x      | 0, 2/3, 1, 3/2     |
//! | 2  | 0 | sin(cπx) | 1/4, 1/3, 1/2      |
//! | 3  | 1 | c·x      | 0, 2/3, 1, 3/2     |
//! | 4  | 1 | sin(cπx) | 1/4, 1/3, 1/2      |
//!
//! Models 2 and 4 at `c = 0` coincide with models 1 and 3 and are left out of
//! their grids.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{self, Decision, PermutationPlan, TestKind};
use crate::matrix::{Matrix, Sample};
use crate::rng::{derive_seed, stream_rng};

/// Stream reserved for data generation inside a replicate; permutation
/// replicates use streams `0..B` of the same key.
const DATA_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FKind {
    Linear,
    Sine,
}

/// One data-generating process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Coefficient on `Z³`.
    pub b: f64,
    pub f_kind: FKind,
    pub c: f64,
    pub noise_sd: f64,
}

impl ModelSpec {
    pub const DEFAULT_NOISE_SD: f64 = 2.0;

    pub fn new(b: f64, f_kind: FKind, c: f64) -> Self {
        Self {
            b,
            f_kind,
            c,
            noise_sd: Self::DEFAULT_NOISE_SD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidArgument(format!("c must be >= 0, got {}", self.c)));
        }
        if !(self.noise_sd > 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise_sd must be positive, got {}",
                self.noise_sd
            )));
        }
        if !self.b.is_finite() {
            return Err(Error::InvalidArgument("b must be finite".into()));
        }
        Ok(())
    }

    /// True when `E(Y | X, Z) = E(Y | Z)` holds for this spec.
    pub fn is_null(&self) -> bool {
        self.c == 0.0
    }

    pub fn f(&self, x: f64) -> f64 {
        match self.f_kind {
            FKind::Linear => self.c * x,
            FKind::Sine => (self.c * PI * x).sin(),
        }
    }
}

/// Draws `n` rows. Each row consumes three standard normals in the order
/// `Z, X, ε`.
pub fn generate<R: Rng + ?Sized>(spec: &ModelSpec, n: usize, rng: &mut R) -> Result<Sample> {
    spec.validate()?;
    if n < inference::MIN_TEST_N {
        return Err(Error::TooFewObservations {
            n,
            min: inference::MIN_TEST_N,
        });
    }
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut zs = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let x: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample::<f64, _>(StandardNormal) * spec.noise_sd;
        xs.push(x);
        zs.push(z);
        ys.push(-z + spec.b * z * z * z + spec.f(x) + e);
    }
    Sample::new(
        Matrix::column_vector(&xs)?,
        Matrix::column_vector(&ys)?,
        Matrix::column_vector(&zs)?,
    )
}

/// A catalogued model with its signal grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub id: u32,
    pub b: f64,
    pub f_kind: FKind,
    pub c_grid: Vec<f64>,
}

impl Model {
    pub fn catalog(id: u32) -> Result<Model> {
        let linear = vec![0.0, 2.0 / 3.0, 1.0, 1.5];
        let sine = vec![0.25, 1.0 / 3.0, 0.5];
        let (b, f_kind, c_grid) = match id {
            1 => (0.0, FKind::Linear, linear),
            2 => (0.0, FKind::Sine, sine),
            3 => (1.0, FKind::Linear, linear),
            4 => (1.0, FKind::Sine, sine),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "unknown model {id}; valid models are 1, 2, 3, 4"
                )))
            }
        };
        Ok(Model {
            id,
            b,
            f_kind,
            c_grid,
        })
    }

    pub fn spec(&self, c: f64) -> ModelSpec {
        ModelSpec::new(self.b, self.f_kind, c)
    }

    pub fn cases(&self) -> Vec<ModelCase> {
        self.c_grid
            .iter()
            .map(|&c| ModelCase {
                model_id: self.id,
                spec: self.spec(c),
            })
            .collect()
    }
}

/// A spec tagged with the model it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelCase {
    pub model_id: u32,
    pub spec: ModelSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 200 replications, 199 permutations.
    Desk,
    /// 1000 replications, 500 permutations.
    Paper,
}

impl Profile {
    pub fn replications(self) -> usize {
        match self {
            Profile::Desk => 200,
            Profile::Paper => 1000,
        }
    }

    pub fn num_permutations(self) -> usize {
        match self {
            Profile::Desk => 199,
            Profile::Paper => 500,
        }
    }
}

pub const DEFAULT_N_GRID: [usize; 5] = [20, 30, 50, 70, 100];
pub const DEFAULT_ALPHAS: [f64; 2] = [0.05, 0.1];

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub cases: Vec<ModelCase>,
    pub n_grid: Vec<usize>,
    pub alphas: Vec<f64>,
    pub replications: usize,
    pub num_permutations: usize,
    pub tests: Vec<TestKind>,
    pub seed: u64,
    /// Append an intercept to `Z` in the regression-based tests.
    pub intercept: bool,
}

impl GridConfig {
    /// Full c grid of each listed model with the profile's sizes.
    pub fn for_models(model_ids: &[u32], profile: Profile, tests: Vec<TestKind>, seed: u64) -> Result<Self> {
        let mut cases = Vec::new();
        for &id in model_ids {
            cases.extend(Model::catalog(id)?.cases());
        }
        Ok(Self {
            cases,
            n_grid: DEFAULT_N_GRID.to_vec(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            replications: profile.replications(),
            num_permutations: profile.num_permutations(),
            tests,
            seed,
            intercept: true,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 || self.num_permutations == 0 {
            return Err(Error::InvalidArgument(
                "replications and permutations must be positive".into(),
            ));
        }
        if self.tests.is_empty() && !self.cases.is_empty() {
            return Err(Error::InvalidArgument("no tests selected".into()));
        }
        for &a in &self.alphas {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidArgument(format!("alpha {a} outside (0, 1)")));
            }
        }
        for &n in &self.n_grid {
            if n < inference::MIN_TEST_N {
                return Err(Error::TooFewObservations {
                    n,
                    min: inference::MIN_TEST_N,
                });
            }
        }
        self.cases.iter().try_for_each(|c| c.spec.validate())
    }
}

/// Key of the random streams for one replicate of one grid cell. Adding or
/// removing tests never changes it.
pub fn replicate_key(seed: u64, model_id: u32, c: f64, n: usize, replicate: usize) -> u64 {
    derive_seed(&[seed, model_id as u64, c.to_bits(), n as u64, replicate as u64])
}

/// The sample drawn for one replicate of one grid cell.
pub fn replicate_sample(seed: u64, case: &ModelCase, n: usize, replicate: usize) -> Result<Sample> {
    let key = replicate_key(seed, case.model_id, case.spec.c, n, replicate);
    generate(&case.spec, n, &mut stream_rng(key, DATA_STREAM))
}

/// P-values of every configured test on one replicate, in `tests` order.
fn replicate_pvalues(cfg: &GridConfig, case: &ModelCase, n: usize, replicate: usize) -> Result<Vec<f64>> {
    let key = replicate_key(cfg.seed, case.model_id, case.spec.c, n, replicate);
    let sample = generate(&case.spec, n, &mut stream_rng(key, DATA_STREAM))?;
    let plan = PermutationPlan::new(cfg.num_permutations, key)?;
    // alpha does not affect the p-value
    cfg.tests
        .iter()
        .map(|&t| inference::run_test(t, &sample, &plan, 0.5, cfg.intercept).map(|r| r.p_value))
        .collect()
}

/// One row of a power table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub model_id: u32,
    pub b: f64,
    pub f_kind: FKind,
    pub c: f64,
    pub n: usize,
    pub alpha: f64,
    pub test: TestKind,
    pub replications: usize,
    pub rejections: usize,
    pub rate: f64,
    pub stderr: f64,
    pub seed: u64,
}

impl PowerRow {
    pub fn new(case: &ModelCase, n: usize, alpha: f64, test: TestKind, replications: usize, rejections: usize, seed: u64) -> Self {
        let rate = rejections as f64 / replications as f64;
        Self {
            model_id: case.model_id,
            b: case.spec.b,
            f_kind: case.spec.f_kind,
            c: case.spec.c,
            n,
            alpha,
            test,
            replications,
            rejections,
            rate,
            stderr: (rate * (1.0 - rate) / replications as f64).sqrt(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

impl PowerTable {
    pub fn find(&self, model_id: u32, c: f64, n: usize, alpha: f64, test: TestKind) -> Option<&PowerRow> {
        self.rows.iter().find(|r| {
            r.model_id == model_id && r.c == c && r.n == n && r.alpha == alpha && r.test == test
        })
    }
}

/// Runs every (case, n) cell for `cfg.replications` replicates. Replicates
/// are spread over the rayon pool; any failure aborts the whole run.
pub fn run_grid(cfg: &GridConfig) -> Result<PowerTable> {
    cfg.validate()?;
    let cells: Vec<(&ModelCase, usize)> = cfg
        .cases
        .iter()
        .flat_map(|case| cfg.n_grid.iter().map(move |&n| (case, n)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|cell| (0..cfg.replications).map(move |rep| (cell, rep)))
        .collect();
    let pvalues: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(cell, rep)| {
            let (case, n) = cells[cell];
            replicate_pvalues(cfg, case, n, rep)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cells.len() * cfg.alphas.len() * cfg.tests.len());
    for (cell, &(case, n)) in cells.iter().enumerate() {
        let block = &pvalues[cell * cfg.replications..(cell + 1) * cfg.replications];
        for &alpha in &cfg.alphas {
            for (t, &test) in cfg.tests.iter().enumerate() {
                let rejections = block
                    .iter()
                    .filter(|p| Decision::at(p[t], alpha) == Decision::Reject)
                    .count();
                rows.push(PowerRow::new(case, n, alpha, test, cfg.replications, rejections, cfg.seed));
            }
        }
    }
    Ok(PowerTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
}

pub const TABLE_COLUMNS: [&str; 12] = [
    "model_id",
    "b",
    "f_kind",
    "c",
    "n",
    "alpha",
    "test",
    "replications",
    "rejections",
    "rate",
    "stderr",
    "seed",
];

/// Writes the table as CSV (header always present) or as a JSON array.
pub fn write_table<W: Write>(table: &PowerTable, format: TableFormat, out: W) -> Result<()> {
    let path = Path::new("<writer>");
    match format {
        TableFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            let csv_err = |source| Error::Csv {
                path: path.into(),
                source,
            };
            w.write_record(TABLE_COLUMNS).map_err(csv_err)?;
            for row in &table.rows {
                w.serialize(row).map_err(csv_err)?;
            }
            w.flush().map_err(|source| Error::Io {
                path: path.into(),
                source,
            })
        }
        TableFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, table).map_err(|source| Error::Json {
                path: path.into(),
                source,
            })?;
            writeln!(out).map_err(|source| Error::Io {
                path: path.into(),
                source,
            })
        }
    }
}

fn with_path(err: Error, path: &Path) -> Error {
    match err {
        Error::Io { source, .. } => Error::Io {
            path: path.into(),
            source,
        },
        Error::Csv { source, .. } => Error::Csv {
            path: path.into(),
            source,
        },
        Error::Json { source, .. } => Error::Json {
            path: path.into(),
            source,
        },
        other => other,
    }
}

pub fn emit_table(table: &PowerTable, format: TableFormat, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    write_table(table, format, BufWriter::new(file)).map_err(|e| with_path(e, path))
}

pub fn read_table(path: &Path, format: TableFormat) -> Result<PowerTable> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    let reader = BufReader::new(file);
    match format {
        TableFormat::Csv => {
            let mut r = csv::Reader::from_reader(reader);
            let rows = r
                .deserialize()
                .collect::<std::result::Result<Vec<PowerRow>, _>>()
                .map_err(|source| Error::Csv {
                    path: path.into(),
                    source,
                })?;
            Ok(PowerTable { rows })
        }
        TableFormat::Json => serde_json::from_reader(reader).map_err(|source| Error::Json {
            path: path.into(),
            source,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_parameters() {
        let m1 = Model::catalog(1).unwrap();
        assert_eq!((m1.b, m1.f_kind), (0.0, FKind::Linear));
        assert_eq!(m1.c_grid, vec![0.0, 2.0 / 3.0, 1.0, 1.5]);
        let m4 = Model::catalog(4).unwrap();
        assert_eq!((m4.b, m4.f_kind), (1.0, FKind::Sine));
        assert_eq!(m4.c_grid, vec![0.25, 1.0 / 3.0, 0.5]);
        assert!(Model::catalog(5).is_err());
    }

    #[test]
    fn null_spec_has_no_x_effect() {
        let spec = Model::catalog(1).unwrap().spec(0.0);
        assert!(spec.is_null());
        for x in [-2.0, 0.0, 3.5] {
            assert_eq!(spec.f(x), 0.0);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = Model::catalog(3).unwrap().spec(1.0);
        let a = generate(&spec, 30, &mut stream_rng(5, 0)).unwrap();
        let b = generate(&spec, 30, &mut stream_rng(5, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_two_at_zero_equals_model_one_at_zero() {
        let a = generate(&Model::catalog(1).unwrap().spec(0.0), 25, &mut stream_rng(8, 2)).unwrap();
        let b = generate(&Model::catalog(2).unwrap().spec(0.0), 25, &mut stream_rng(8, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = ModelSpec::new(0.0, FKind::Linear, -1.0);
        assert!(generate(&spec, 10, &mut stream_rng(0, 0)).is_err());
        spec.c = 1.0;
        spec.noise_sd = 0.0;
        assert!(spec.validate().is_err());
        spec.noise_sd = 2.0;
        assert!(generate(&spec, 3, &mut stream_rng(0, 0)).is_err());
    }

    #[test]
    fn single_replication_rates_are_binary() {
        let mut cfg = GridConfig::for_models(&[1], Profile::Desk, vec![TestKind::LinMdd, TestKind::PartialF], 3).unwrap();
        cfg.replications = 1;
        cfg.num_permutations = 19;
        cfg.n_grid = vec![20];
        let t = run_grid(&cfg).unwrap();
        assert_eq!(t.rows.len(), 4 * 2 * 2);
        for r in &t.rows {
            assert!(r.rate == 0.0 || r.rate == 1.0);
            assert_eq!(r.rate, r.rejections as f64 / r.replications as f64);
        }
    }

    #[test]
    fn profiles() {
        assert_eq!((Profile::Desk.replications(), Profile::Desk.num_permutations()), (200, 199));
        assert_eq!((Profile::Paper.replications(), Profile::Paper.num_permutations()), (1000, 500));
    }
}
