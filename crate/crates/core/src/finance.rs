//! Factor-panel ingestion and the factor-model case studies.
//!
//! A panel holds one row per year with the excess market return, the size,
//! value, profitability and investment factors, the risk-free rate and one
//! asset's return. Files are delimiter-separated text with a single header
//! row; a [`PanelSchema`] maps header names to roles. Values are normalised
//! to decimal units on load.
//!
//! Each case study asks whether a set of factors `X` adds to the conditional
//! mean of the excess asset return `Y` given the factors in `Z`, with a
//! constant always placed first in `Z`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{self, Decision, PermutationPlan, TestReport};
use crate::matrix::{Matrix, Sample};

pub const MKT_EXCESS: &str = "Mkt_excess";
pub const SMB: &str = "SMB";
pub const HML: &str = "HML";
pub const RMW: &str = "RMW";
pub const CMA: &str = "CMA";
pub const RF: &str = "RF";
/// Canonical name of the excess asset return.
pub const EXCESS_RETURN: &str = "r";
pub const YEAR: &str = "year";

pub const MIN_PANEL_YEARS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    Percent,
    Decimal,
}

impl Units {
    fn to_decimal(self, v: f64) -> f64 {
        match self {
            Units::Percent => v / 100.0,
            Units::Decimal => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Year,
    MktExcess,
    Smb,
    Hml,
    Rmw,
    Cma,
    Rf,
    /// Raw asset return; the risk-free rate is subtracted on load.
    AssetRaw,
    /// Asset return already in excess of the risk-free rate.
    AssetExcess,
}

impl ColumnRole {
    fn canonical(self) -> &'static str {
        match self {
            ColumnRole::Year => YEAR,
            ColumnRole::MktExcess => MKT_EXCESS,
            ColumnRole::Smb => SMB,
            ColumnRole::Hml => HML,
            ColumnRole::Rmw => RMW,
            ColumnRole::Cma => CMA,
            ColumnRole::Rf => RF,
            ColumnRole::AssetRaw | ColumnRole::AssetExcess => EXCESS_RETURN,
        }
    }
}

/// Maps file header names to roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelSchema {
    pub columns: BTreeMap<String, ColumnRole>,
    pub units: Units,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

fn default_delimiter() -> char {
    ','
}

impl PanelSchema {
    /// Layout of the bundled panel files: `year,Mkt-RF,SMB,HML,RMW,CMA,RF,<asset>`
    /// in percent, with the asset return raw.
    pub fn percent_with_raw_asset(asset: &str) -> Self {
        let columns = [
            (YEAR, ColumnRole::Year),
            ("Mkt-RF", ColumnRole::MktExcess),
            (SMB, ColumnRole::Smb),
            (HML, ColumnRole::Hml),
            (RMW, ColumnRole::Rmw),
            (CMA, ColumnRole::Cma),
            (RF, ColumnRole::Rf),
            (asset, ColumnRole::AssetRaw),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            columns,
            units: Units::Percent,
            delimiter: ',',
        }
    }

    /// Layout written by [`write_panel`].
    pub fn canonical() -> Self {
        let columns = [
            ColumnRole::Year,
            ColumnRole::MktExcess,
            ColumnRole::Smb,
            ColumnRole::Hml,
            ColumnRole::Rmw,
            ColumnRole::Cma,
            ColumnRole::Rf,
            ColumnRole::AssetExcess,
        ]
        .into_iter()
        .map(|r| (r.canonical().to_string(), r))
        .collect();
        Self {
            columns,
            units: Units::Decimal,
            delimiter: ',',
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })?;
        serde_json::from_reader(file).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })
    }
}

/// Validated yearly panel in decimal units, keyed by canonical column names.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPanel {
    years: Vec<i32>,
    columns: BTreeMap<String, Vec<f64>>,
}

impl FactorPanel {
    pub fn new(years: Vec<i32>, columns: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        if years.len() < MIN_PANEL_YEARS {
            return Err(Error::InvalidPanel(format!(
                "need at least {MIN_PANEL_YEARS} years, got {}",
                years.len()
            )));
        }
        if let Some(w) = years.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPanel(format!(
                "years must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        for (name, values) in &columns {
            if values.len() != years.len() {
                return Err(Error::InvalidPanel(format!(
                    "column {name:?} has {} values for {} years",
                    values.len(),
                    years.len()
                )));
            }
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::MissingValue {
                    row: i + 1,
                    year: years[i].to_string(),
                    column: name.clone(),
                });
            }
        }
        Ok(Self { years, columns })
    }

    pub fn n(&self) -> usize {
        self.years.len()
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    fn block(&self, names: &[String], with_const: bool) -> Result<Matrix> {
        let cols: Vec<&[f64]> = names.iter().map(|c| self.column(c)).collect::<Result<_>>()?;
        let offset = usize::from(with_const);
        Matrix::from_fn(self.n(), cols.len() + offset, |i, j| {
            if j < offset {
                1.0
            } else {
                cols[j - offset][i]
            }
        })
    }
}

fn parse_cell(raw: &str, row: usize, year: &str, column: &str) -> Result<f64> {
    let s = raw.trim();
    if s.is_empty() || ["NA", "NaN", "nan", "."].contains(&s) {
        return Err(Error::MissingValue {
            row,
            year: year.to_string(),
            column: column.to_string(),
        });
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::NonNumericCell {
            row,
            column: column.to_string(),
            value: s.to_string(),
        })
}

/// Reads and validates a panel. Rows are numbered from 1 after the header.
pub fn load_panel(path: &Path, schema: &PanelSchema) -> Result<FactorPanel> {
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let delimiter = u8::try_from(schema.delimiter).map_err(|_| {
        Error::InvalidArgument(format!("delimiter {:?} is not ASCII", schema.delimiter))
    })?;
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(csv_err)?.clone();

    let mut year_idx = None;
    let mut asset: Option<(&String, ColumnRole)> = None;
    let mut wanted: Vec<(usize, &String, ColumnRole)> = Vec::new();
    for (name, &role) in &schema.columns {
        let idx = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        match role {
            ColumnRole::Year => year_idx = Some(idx),
            ColumnRole::AssetRaw | ColumnRole::AssetExcess => {
                if let Some((other, _)) = asset {
                    return Err(Error::InvalidArgument(format!(
                        "schema maps two asset columns ({other:?} and {name:?})"
                    )));
                }
                asset = Some((name, role));
            }
            _ => {}
        }
        wanted.push((idx, name, role));
    }
    let year_idx = year_idx.ok_or_else(|| Error::MissingColumn(YEAR.to_string()))?;
    if matches!(asset, Some((_, ColumnRole::AssetRaw)))
        && !schema.columns.values().any(|&r| r == ColumnRole::Rf)
    {
        return Err(Error::MissingColumn(RF.to_string()));
    }

    let mut years = Vec::new();
    let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut raw_asset = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(csv_err)?;
        let year_cell = record.get(year_idx).unwrap_or("").trim().to_string();
        let year = year_cell.parse::<i32>().map_err(|_| {
            if year_cell.is_empty() {
                Error::MissingValue {
                    row,
                    year: String::new(),
                    column: YEAR.to_string(),
                }
            } else {
                Error::NonNumericCell {
                    row,
                    column: YEAR.to_string(),
                    value: year_cell.clone(),
                }
            }
        })?;
        years.push(year);
        for &(idx, name, role) in &wanted {
            if role == ColumnRole::Year {
                continue;
            }
            let v = schema
                .units
                .to_decimal(parse_cell(record.get(idx).unwrap_or(""), row, &year_cell, name)?);
            match role {
                ColumnRole::AssetRaw => raw_asset.push(v),
                _ => columns.entry(role.canonical().to_string()).or_default().push(v),
            }
        }
    }
    if matches!(asset, Some((_, ColumnRole::AssetRaw))) {
        let rf = &columns[RF];
        let excess = raw_asset.iter().zip(rf).map(|(r, f)| r - f).collect();
        columns.insert(EXCESS_RETURN.to_string(), excess);
    }
    FactorPanel::new(years, columns)
}

/// Writes the panel in the canonical decimal layout; [`load_panel`] with
/// [`PanelSchema::canonical`] restricted to the written columns reads it back
/// unchanged.
pub fn write_panel(panel: &FactorPanel, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })?;
    let csv_err = |source| Error::Csv {
        path: path.into(),
        source,
    };
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let names: Vec<&str> = panel.column_names().collect();
    let mut header = vec![YEAR];
    header.extend(&names);
    w.write_record(&header).map_err(csv_err)?;
    for (i, year) in panel.years.iter().enumerate() {
        let mut record = vec![year.to_string()];
        record.extend(names.iter().map(|c| panel.columns[*c][i].to_string()));
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}

/// Schema matching the columns [`write_panel`] emits for `panel`.
pub fn canonical_schema_for(panel: &FactorPanel) -> PanelSchema {
    let mut schema = PanelSchema::canonical();
    schema
        .columns
        .retain(|name, _| name == YEAR || panel.columns.contains_key(name));
    schema
}

/// Variable assignment of one case study.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseStudySpec {
    pub name: String,
    pub x_columns: Vec<String>,
    /// Columns of `Z` after the constant, which is always prepended.
    pub z_columns: Vec<String>,
    pub y_column: String,
}

impl CaseStudySpec {
    pub fn new(name: &str, x: &[&str], z: &[&str], y: &str) -> Result<Self> {
        let spec = Self {
            name: name.to_string(),
            x_columns: x.iter().map(|s| s.to_string()).collect(),
            z_columns: z.iter().map(|s| s.to_string()).collect(),
            y_column: y.to_string(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_columns.is_empty() {
            return Err(Error::InvalidArgument(format!("case {:?} has no X columns", self.name)));
        }
        let mut all: Vec<&String> = self.x_columns.iter().chain(&self.z_columns).collect();
        all.push(&self.y_column);
        let mut seen = std::collections::BTreeSet::new();
        for c in all {
            if !seen.insert(c) {
                return Err(Error::InvalidArgument(format!(
                    "case {:?} uses column {c:?} in more than one role",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// `(X, Y, Z)` with a leading column of ones in `Z`.
    pub fn sample(&self, panel: &FactorPanel) -> Result<Sample> {
        self.validate()?;
        Sample::new(
            panel.block(&self.x_columns, false)?,
            panel.block(std::slice::from_ref(&self.y_column), false)?,
            panel.block(&self.z_columns, true)?,
        )
    }
}

/// The three factor-model comparisons: market model against three factors,
/// three against five factors, and the redundancy of the value factor given
/// the other four.
pub fn builtin_specs() -> Vec<CaseStudySpec> {
    [
        ("capm-vs-ff3", &[SMB, HML][..], &[MKT_EXCESS][..]),
        ("ff3-vs-ff5", &[RMW, CMA][..], &[MKT_EXCESS, SMB, HML][..]),
        ("hml-redundancy", &[HML][..], &[MKT_EXCESS, SMB, RMW, CMA][..]),
    ]
    .into_iter()
    .map(|(name, x, z)| CaseStudySpec::new(name, x, z, EXCESS_RETURN).expect("built-in specs are valid"))
    .collect()
}

pub fn builtin_spec(name: &str) -> Option<CaseStudySpec> {
    builtin_specs().into_iter().find(|s| s.name == name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub name: String,
    pub report: TestReport,
}

/// Serialized form of a [`CaseReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub name: String,
    pub statistic: f64,
    pub p_value: f64,
    #[serde(rename = "B")]
    pub num_permutations: usize,
    pub seed: u64,
    pub alpha: f64,
    pub decision: Decision,
}

impl CaseReport {
    pub fn record(&self) -> CaseRecord {
        CaseRecord {
            name: self.name.clone(),
            statistic: self.report.statistic,
            p_value: self.report.p_value,
            num_permutations: self.report.num_permutations,
            seed: self.report.seed,
            alpha: self.report.alpha,
            decision: self.report.decision,
        }
    }
}

/// Runs the LinMDD test for one case study. The constant is part of `Z`, so
/// no further intercept is added.
pub fn run_case(panel: &FactorPanel, spec: &CaseStudySpec, plan: &PermutationPlan, alpha: f64) -> Result<CaseReport> {
    let sample = spec.sample(panel)?;
    Ok(CaseReport {
        name: spec.name.clone(),
        report: inference::linmdd_test(&sample, plan, alpha, false)?,
    })
}
