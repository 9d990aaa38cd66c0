//! Command-line front-end for the `linmdd` tools.
//!
//! Every subcommand writes JSON (or CSV for power tables) that is a pure
//! function of its flags, so rerunning a command with the same seed gives a
//! byte-identical artifact regardless of `--threads`.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use linmdd_core::finance::{self, PanelSchema};
use linmdd_core::simulation::{self, GridConfig, Profile, TableFormat};
use linmdd_core::{
    inference, mdd, mdd_squared, Error, FitMethod, Matrix, PermutationPlan, Sample, TestKind, TestReport,
};

/// Seed used by `test` and `finance` when `--seed` is omitted.
pub const DEFAULT_SEED: u64 = 20_190_101;
pub const DEFAULT_PERMUTATIONS: usize = 500;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_FINANCE_ALPHA: f64 = 0.1;
/// Raw-return column expected in a panel when no schema file is given.
pub const DEFAULT_ASSET_COLUMN: &str = "BA";

#[derive(Debug, Parser)]
#[command(name = "linmdd", version, about = "Conditional mean independence tests based on the martingale difference divergence")]
pub struct Cli {
    /// Print progress and configuration to stderr (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    /// Worker threads for permutation and Monte Carlo loops (default: all cores)
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Empirical MDD of Y given X
    Mdd(MddArgs),
    /// Run a conditional mean independence test on matrix files
    Test(TestArgs),
    /// Monte Carlo size and power grid for the simulation models
    Simulate(SimulateArgs),
    /// Factor-model case studies on an annual returns panel
    Finance(FinanceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Field delimiter of the matrix files (a single character, or "tab")
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    pub delimiter: u8,

    /// Treat the first line of every matrix file as a header
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct MddArgs {
    /// Conditioning variable X, one observation per row
    #[arg(long, value_name = "FILE")]
    pub x: PathBuf,

    /// Response Y, one observation per row
    #[arg(long, value_name = "FILE")]
    pub y: PathBuf,

    #[command(flatten)]
    pub input: InputArgs,

    /// Write the JSON result here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    /// Tested covariates X
    #[arg(long, value_name = "FILE")]
    pub x: PathBuf,

    /// Response Y
    #[arg(long, value_name = "FILE")]
    pub y: PathBuf,

    /// Conditioning covariates Z (required except for --method mdd)
    #[arg(long, value_name = "FILE")]
    pub z: Option<PathBuf>,

    #[command(flatten)]
    pub input: InputArgs,

    /// Test to run
    #[arg(long, value_enum, default_value_t = Method::Linmdd)]
    pub method: Method,

    /// Number of permutations
    #[arg(long = "B", value_name = "B", default_value_t = DEFAULT_PERMUTATIONS)]
    pub num_permutations: usize,

    /// Seed of the permutation streams
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Significance level
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,

    /// Append an intercept column to Z before residualizing
    #[arg(long)]
    pub intercept: bool,

    /// Residualize with a ridge penalty instead of ordinary least squares (linmdd only)
    #[arg(long, value_name = "LAMBDA")]
    pub ridge: Option<f64>,

    /// Use the (1 + #exceedances) / (1 + B) p-value
    #[arg(long)]
    pub continuity_correction: bool,

    /// Output format; only JSON is a stable interface
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,

    /// Write the report here and print a one-line summary instead
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Replication profile
    #[arg(long, value_enum, default_value_t = ProfileArg::Desk)]
    pub profile: ProfileArg,

    /// Comma-separated model ids
    #[arg(long, value_delimiter = ',', default_values_t = [1u32, 2, 3, 4])]
    pub models: Vec<u32>,

    /// Comma-separated tests
    #[arg(long, value_delimiter = ',', value_enum, default_values_t = [Method::Linmdd, Method::Mdd, Method::PartialF])]
    pub tests: Vec<Method>,

    /// Master seed of the grid
    #[arg(long)]
    pub seed: u64,

    /// Comma-separated sample sizes (default 20,30,50,70,100)
    #[arg(long = "n", value_name = "N", value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,

    /// Override the profile's replications per cell
    #[arg(long)]
    pub replications: Option<usize>,

    /// Override the profile's number of permutations
    #[arg(long = "B", value_name = "B")]
    pub num_permutations: Option<usize>,

    /// Table format
    #[arg(long, value_enum, default_value_t = TableFormatArg::Csv)]
    pub format: TableFormatArg,

    /// Write the table here and print a one-line summary instead
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FinanceArgs {
    /// Case study: capm-vs-ff3, ff3-vs-ff5 or hml-redundancy
    #[arg(long)]
    pub case: String,

    /// Annual panel CSV
    #[arg(long, value_name = "FILE")]
    pub panel: PathBuf,

    /// JSON column-role schema; without it the panel must have the header
    /// year,Mkt-RF,SMB,HML,RMW,CMA,RF,<asset> in percent
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,

    /// Raw-return column of the asset when no schema is given
    #[arg(long, default_value = DEFAULT_ASSET_COLUMN)]
    pub asset: String,

    /// Number of permutations
    #[arg(long = "B", value_name = "B", default_value_t = DEFAULT_PERMUTATIONS)]
    pub num_permutations: usize,

    /// Seed of the permutation streams
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Significance level
    #[arg(long, default_value_t = DEFAULT_FINANCE_ALPHA)]
    pub alpha: f64,

    /// Write the JSON record here and print a one-line summary instead
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Linmdd,
    PartialF,
    Mdd,
}

impl From<Method> for TestKind {
    fn from(m: Method) -> Self {
        match m {
            Method::Linmdd => TestKind::LinMdd,
            Method::PartialF => TestKind::PartialF,
            Method::Mdd => TestKind::Mdd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    /// 200 replications, 199 permutations
    Desk,
    /// 1000 replications, 500 permutations
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormatArg {
    Csv,
    Json,
}

fn parse_delimiter(s: &str) -> Result<u8, String> {
    match s {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("expected a single ASCII character or \"tab\", got {s:?}")),
    }
}

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed input (exit 2).
    Input(String),
    /// Rank deficiency or other numerical failure (exit 3).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::RankDeficient(_) => CliError::Numerical(format!(
                "{e}\nhint: pass --ridge <LAMBDA> to residualize with a ridge penalty"
            )),
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

/// Reads a delimiter-separated numeric matrix, one observation per line.
/// Blank lines are skipped; errors name the file and the 1-based line.
pub fn read_matrix(path: &Path, input: &InputArgs) -> CliResult<Matrix> {
    let fail = |msg: String| CliError::Input(format!("{}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(input.delimiter)
        .has_headers(input.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| fail(e.to_string()))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let expected = *cols.get_or_insert(record.len());
        if record.len() != expected {
            return Err(fail(format!(
                "row {line} has {} fields, expected {expected}",
                record.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| fail(format!("row {line}, column {}: {cell:?} is not a number", j + 1)))?;
            if !v.is_finite() {
                return Err(fail(format!("row {line}, column {}: non-finite value", j + 1)));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| fail("no data rows".into()))?;
    Matrix::new(rows, cols, data).map_err(|e| fail(e.to_string()))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

fn write_artifact(path: &Path, contents: &[u8]) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Input(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

#[derive(Debug, Serialize)]
struct MddOutput {
    mdd_squared: f64,
    mdd: f64,
}

/// Runs one parsed command, writing human output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Mdd(a) => cmd_mdd(a, out),
        Command::Test(a) => cmd_test(a, cli.verbose, out),
        Command::Simulate(a) => cmd_simulate(a, cli.verbose, out),
        Command::Finance(a) => cmd_finance(a, cli.verbose, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Input(format!("writing output: {e}")))
}

pub fn cmd_mdd(a: &MddArgs, out: &mut dyn Write) -> CliResult<()> {
    let x = read_matrix(&a.x, &a.input)?;
    let y = read_matrix(&a.y, &a.input)?;
    let result = MddOutput {
        mdd_squared: mdd_squared(&x, &y)?,
        mdd: mdd(&x, &y)?,
    };
    let text = json(&result);
    match &a.output {
        Some(path) => {
            write_artifact(path, text.as_bytes())?;
            emit(out, &format!("MDD_n^2 = {} written to {}\n", result.mdd_squared, path.display()))
        }
        None => emit(out, &text),
    }
}

fn summary(report: &TestReport) -> String {
    format!(
        "{}: statistic {:.6e}, p-value {}, {:?} at alpha {}",
        report.test, report.statistic, report.p_value, report.decision, report.alpha
    )
}

fn report_table(report: &TestReport) -> String {
    let mut s = String::new();
    s += &format!("{:<10} {}\n", "test", report.test);
    s += &format!("{:<10} {:.6e}\n", "statistic", report.statistic);
    s += &format!("{:<10} {:.4}\n", "p-value", report.p_value);
    if report.test != TestKind::PartialF {
        s += &format!("{:<10} {}\n", "B", report.num_permutations);
        s += &format!("{:<10} {}\n", "seed", report.seed);
    }
    s += &format!("{:<10} {}\n", "alpha", report.alpha);
    s += &format!("{:<10} {:?}\n", "decision", report.decision);
    s
}

pub fn cmd_test(a: &TestArgs, verbose: u8, out: &mut dyn Write) -> CliResult<()> {
    check_alpha(a.alpha)?;
    let plan = PermutationPlan::new(a.num_permutations, a.seed)?.with_continuity_correction(a.continuity_correction);
    if a.ridge.is_some() && a.method != Method::Linmdd {
        return Err(CliError::Input("--ridge only applies to --method linmdd".into()));
    }
    let x = read_matrix(&a.x, &a.input)?;
    let y = read_matrix(&a.y, &a.input)?;
    let report = match (a.method, &a.z) {
        (Method::Mdd, _) => inference::mdd_test(&x, &y, &plan, a.alpha)?,
        (_, None) => {
            return Err(CliError::Input(format!(
                "--z is required for --method {}",
                TestKind::from(a.method)
            )))
        }
        (method, Some(z_path)) => {
            let z = read_matrix(z_path, &a.input)?;
            let sample = Sample::new(x, y, z)?;
            if verbose > 0 {
                eprintln!(
                    "n = {}, p = {}, q = {}, r = {}",
                    sample.n(),
                    sample.x().cols(),
                    sample.y().cols(),
                    sample.z().cols()
                );
            }
            match (method, a.ridge) {
                (Method::Linmdd, Some(lambda)) => {
                    inference::linmdd_test_with(&sample, &plan, a.alpha, a.intercept, FitMethod::Ridge { lambda })?
                }
                (Method::Linmdd, None) => inference::linmdd_test(&sample, &plan, a.alpha, a.intercept)?,
                _ => inference::partial_f_test(&sample, a.alpha, a.intercept)?,
            }
        }
    };
    let text = match a.format {
        ReportFormat::Json => json(&report),
        ReportFormat::Table => report_table(&report),
    };
    match &a.output {
        Some(path) => {
            write_artifact(path, text.as_bytes())?;
            emit(out, &format!("{}\n", summary(&report)))
        }
        None => emit(out, &text),
    }
}

pub fn cmd_simulate(a: &SimulateArgs, verbose: u8, out: &mut dyn Write) -> CliResult<()> {
    let profile = match a.profile {
        ProfileArg::Desk => Profile::Desk,
        ProfileArg::Paper => Profile::Paper,
    };
    let mut tests: Vec<TestKind> = Vec::new();
    for &m in &a.tests {
        if !tests.contains(&m.into()) {
            tests.push(m.into());
        }
    }
    let mut cfg = GridConfig::for_models(&a.models, profile, tests, a.seed)?;
    if let Some(n) = &a.n_grid {
        cfg.n_grid = n.clone();
    }
    if let Some(r) = a.replications {
        cfg.replications = r;
    }
    if let Some(b) = a.num_permutations {
        cfg.num_permutations = b;
    }
    if verbose > 0 {
        eprintln!(
            "{} cases x {} sizes x {} tests, {} replications, B = {}",
            cfg.cases.len(),
            cfg.n_grid.len(),
            cfg.tests.len(),
            cfg.replications,
            cfg.num_permutations
        );
    }
    let table = simulation::run_grid(&cfg)?;
    let format = match a.format {
        TableFormatArg::Csv => TableFormat::Csv,
        TableFormatArg::Json => TableFormat::Json,
    };
    match &a.output {
        Some(path) => {
            simulation::emit_table(&table, format, path)?;
            emit(
                out,
                &format!("{} rows ({} replications each) written to {}\n", table.rows.len(), cfg.replications, path.display()),
            )
        }
        None => {
            let mut buf = Vec::new();
            simulation::write_table(&table, format, &mut buf)?;
            out.write_all(&buf)
                .map_err(|e| CliError::Input(format!("writing output: {e}")))
        }
    }
}

pub fn cmd_finance(a: &FinanceArgs, verbose: u8, out: &mut dyn Write) -> CliResult<()> {
    check_alpha(a.alpha)?;
    let spec = finance::builtin_spec(&a.case).ok_or_else(|| {
        let names: Vec<String> = finance::builtin_specs().into_iter().map(|s| s.name).collect();
        CliError::Input(format!("unknown case {:?}; valid cases: {}", a.case, names.join(", ")))
    })?;
    let schema = match &a.schema {
        Some(path) => PanelSchema::from_json_file(path)?,
        None => PanelSchema::percent_with_raw_asset(&a.asset),
    };
    let panel = finance::load_panel(&a.panel, &schema)?;
    if verbose > 0 {
        eprintln!(
            "panel {}: {} years ({}..{})",
            a.panel.display(),
            panel.n(),
            panel.years()[0],
            panel.years()[panel.n() - 1]
        );
    }
    let plan = PermutationPlan::new(a.num_permutations, a.seed)?;
    let record = finance::run_case(&panel, &spec, &plan, a.alpha)?.record();
    let text = json(&record);
    match &a.output {
        Some(path) => {
            write_artifact(path, text.as_bytes())?;
            emit(
                out,
                &format!(
                    "{}: p-value {} with B = {}, {:?} at alpha {}\n",
                    record.name, record.p_value, record.num_permutations, record.decision, record.alpha
                ),
            )
        }
        None => emit(out, &text),
    }
}
