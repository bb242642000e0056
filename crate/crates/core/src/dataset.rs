//! Clinical dataset ingestion: CSV loading and validation, HOMA derivation,
//! BMI flags, relative-risk table joins, and the [`FeatureMatrix`] carrier
//! that every downstream stage consumes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// HOMA divisor: glucose is converted mg/dL -> mmol/L (factor 18.016) and the
/// product is divided by the conventional 22.5, i.e. `insulin * glucose / 405.36`.
pub const HOMA_DIVISOR: f64 = 18.016 * 22.5;

/// BMI threshold for the HighBMI indicator.
pub const HIGH_BMI_THRESHOLD: f64 = 25.0;
/// BMI threshold for the Obesity indicator (WHO convention).
pub const OBESITY_THRESHOLD: f64 = 30.0;

/// Feature columns produced by [`join_relative_risks`], in output order.
pub const FEATURE_COLUMNS: [&str; 15] = [
    "Age",
    "BMI",
    "Glucose",
    "Insulin",
    "HOMA",
    "Leptin",
    "Adiponectin",
    "Resistin",
    "MCP-1",
    "RR_Liu",
    "RR_GBD_center",
    "RR_GBD_lower",
    "RR_GBD_upper",
    "HighBMI",
    "Obesity",
];

/// On-disk label column name and encoding ({1 = healthy, 2 = cancer}),
/// matching the public Coimbra file convention.
pub const LABEL_COLUMN: &str = "Classification";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("column \"{0}\" missing from header")]
    MissingColumn(String),
    #[error("non-numeric cell at data row {row}, column \"{column}\": {cell:?}")]
    NonNumericCell { row: usize, column: String, cell: String },
    #[error("data row {row}: {field} = {value} violates {constraint}")]
    RangeViolation { row: usize, field: &'static str, value: f64, constraint: &'static str },
    #[error("file has no data rows")]
    EmptyFile,
    #[error("input must be positive, got {0}")]
    NonPositiveInput(f64),
    #[error("{kind} table does not cover value {value}")]
    UncoveredRange { kind: RiskTableKind, value: f64 },
    #[error("invalid risk table: {0}")]
    InvalidRiskTable(String),
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("invalid feature matrix: {0}")]
    InvalidMatrix(String),
}

/// One woman's demographic, anthropometric and biomarker measurements plus
/// the diagnosis label (0 = healthy, 1 = cancer).
#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub age: f64,
    pub bmi: f64,
    pub glucose: f64,
    pub insulin: f64,
    pub homa: f64,
    pub leptin: f64,
    pub adiponectin: f64,
    pub resistin: f64,
    pub mcp1: f64,
    pub label: u8,
}

/// Maps logical fields to CSV header names. `homa` is optional: when absent
/// the index is derived from insulin and glucose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColumnSchema {
    pub age: String,
    pub bmi: String,
    pub glucose: String,
    pub insulin: String,
    pub homa: Option<String>,
    pub leptin: String,
    pub adiponectin: String,
    pub resistin: String,
    pub mcp1: String,
    pub label: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            age: "Age".into(),
            bmi: "BMI".into(),
            glucose: "Glucose".into(),
            insulin: "Insulin".into(),
            homa: Some("HOMA".into()),
            leptin: "Leptin".into(),
            adiponectin: "Adiponectin".into(),
            resistin: "Resistin".into(),
            mcp1: "MCP.1".into(),
            label: "Classification".into(),
        }
    }
}

/// Which patient field a risk table is keyed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskTableKind {
    AgeBased,
    BmiBased,
}

impl std::fmt::Display for RiskTableKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RiskTableKind::AgeBased => write!(f, "age-based"),
            RiskTableKind::BmiBased => write!(f, "bmi-based"),
        }
    }
}

/// One half-open bin `[low, high)` with its relative-risk triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBand {
    pub range_low: f64,
    pub range_high: f64,
    pub rr_center: f64,
    pub rr_lower: f64,
    pub rr_upper: f64,
}

/// Relative-risk lookup table over contiguous, sorted, non-overlapping bins.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskTable {
    kind: RiskTableKind,
    rows: Vec<RiskBand>,
}

impl RiskTable {
    pub fn new(kind: RiskTableKind, rows: Vec<RiskBand>) -> Result<Self, DatasetError> {
        if rows.is_empty() {
            return Err(DatasetError::InvalidRiskTable("table has no rows".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if !(r.range_low < r.range_high) {
                return Err(DatasetError::InvalidRiskTable(format!(
                    "row {i}: empty range [{}, {})",
                    r.range_low, r.range_high
                )));
            }
            if !(r.rr_lower > 0.0 && r.rr_lower <= r.rr_center && r.rr_center <= r.rr_upper) {
                return Err(DatasetError::InvalidRiskTable(format!(
                    "row {i}: require 0 < rr_lower <= rr_center <= rr_upper"
                )));
            }
            if i > 0 && rows[i - 1].range_high != r.range_low {
                return Err(DatasetError::InvalidRiskTable(format!(
                    "rows {} and {i} are not contiguous",
                    i - 1
                )));
            }
        }
        Ok(Self { kind, rows })
    }

    pub fn kind(&self) -> RiskTableKind {
        self.kind
    }

    pub fn rows(&self) -> &[RiskBand] {
        &self.rows
    }

    /// Find the band with `range_low <= value < range_high`.
    pub fn lookup(&self, value: f64) -> Result<&RiskBand, DatasetError> {
        self.rows
            .iter()
            .find(|r| value >= r.range_low && value < r.range_high)
            .ok_or(DatasetError::UncoveredRange { kind: self.kind, value })
    }

    /// Load from a CSV with columns `range_low,range_high,rr_center,rr_lower,rr_upper`.
    pub fn load(path: impl AsRef<Path>, kind: RiskTableKind) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
        let want = ["range_low", "range_high", "rr_center", "rr_lower", "rr_upper"];
        let mut idx = [0usize; 5];
        for (k, name) in want.iter().enumerate() {
            idx[k] = headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| DatasetError::MissingColumn((*name).into()))?;
        }
        let mut rows = Vec::new();
        for (row_no, record) in reader.records().enumerate() {
            let record = record.map_err(|e| csv_err(path, e))?;
            let mut vals = [0.0f64; 5];
            for (k, &i) in idx.iter().enumerate() {
                let cell = record.get(i).unwrap_or("");
                vals[k] = cell.trim().parse().map_err(|_| DatasetError::NonNumericCell {
                    row: row_no + 1,
                    column: want[k].into(),
                    cell: cell.into(),
                })?;
            }
            rows.push(RiskBand {
                range_low: vals[0],
                range_high: vals[1],
                rr_center: vals[2],
                rr_lower: vals[3],
                rr_upper: vals[4],
            });
        }
        Self::new(kind, rows)
    }
}

fn csv_err(path: &Path, e: csv::Error) -> DatasetError {
    DatasetError::Csv { path: path.display().to_string(), source: e }
}

/// Decode an on-disk class label ({1 = healthy, 2 = cancer}) to {0, 1}.
fn parse_label(raw: f64, row: usize) -> Result<u8, DatasetError> {
    if raw == 1.0 || raw == 2.0 {
        Ok((raw as u8) - 1)
    } else {
        Err(DatasetError::RangeViolation {
            row,
            field: "label",
            value: raw,
            constraint: "label in {1 = healthy, 2 = cancer}",
        })
    }
}

/// Column-named numeric matrix with a binary label vector; the common
/// currency between the dataset, selection, and benchmarking stages.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    column_names: Vec<String>,
    values: Vec<f64>, // row-major, n_rows x n_cols
    labels: Vec<u8>,
}

impl FeatureMatrix {
    pub fn new(
        column_names: Vec<String>,
        values: Vec<f64>,
        labels: Vec<u8>,
    ) -> Result<Self, DatasetError> {
        let p = column_names.len();
        let n = labels.len();
        if p == 0 || n == 0 {
            return Err(DatasetError::InvalidMatrix("empty matrix".into()));
        }
        if values.len() != n * p {
            return Err(DatasetError::InvalidMatrix(format!(
                "{} values for {n} rows x {p} columns",
                values.len()
            )));
        }
        for (i, name) in column_names.iter().enumerate() {
            if column_names[..i].contains(name) {
                return Err(DatasetError::InvalidMatrix(format!("duplicate column \"{name}\"")));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(DatasetError::InvalidMatrix(format!("non-finite value {v}")));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(DatasetError::InvalidMatrix(format!("label {l} outside {{0,1}}")));
        }
        Ok(Self { column_names, values, labels })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[i * p..(i + 1) * p]
    }

    /// Row-major backing slice (`n_rows * n_cols` values).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// Copy of one column.
    pub fn column(&self, col: usize) -> Vec<f64> {
        let p = self.n_cols();
        self.values.iter().skip(col).step_by(p).copied().collect()
    }

    /// New matrix restricted to the named columns, in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<Self, DatasetError> {
        let mut cols = Vec::with_capacity(names.len());
        for name in names {
            cols.push(
                self.column_index(name)
                    .ok_or_else(|| DatasetError::MissingColumn(name.clone()))?,
            );
        }
        let mut values = Vec::with_capacity(self.n_rows() * cols.len());
        for i in 0..self.n_rows() {
            let row = self.row(i);
            values.extend(cols.iter().map(|&c| row[c]));
        }
        Self::new(names.to_vec(), values, self.labels.clone())
    }

    /// New matrix keeping the given rows, in the given order.
    pub fn subset_rows(&self, rows: &[usize]) -> Self {
        let p = self.n_cols();
        let mut values = Vec::with_capacity(rows.len() * p);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self { column_names: self.column_names.clone(), values, labels }
    }

    /// Write as CSV: feature columns plus a `Classification` column encoded
    /// {1 = healthy, 2 = cancer}. Values use the shortest representation that
    /// round-trips f64 exactly.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.column_names.join(","));
        out.push(',');
        out.push_str(LABEL_COLUMN);
        out.push('\n');
        for i in 0..self.n_rows() {
            for v in self.row(i) {
                let _ = write!(out, "{v},");
            }
            let _ = writeln!(out, "{}", self.labels[i] + 1);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        fs::write(path.as_ref(), self.to_csv_string()).map_err(|e| DatasetError::Io {
            path: path.as_ref().display().to_string(),
            source: e,
        })
    }

    /// Read a matrix written by [`FeatureMatrix::write_csv`]: every column
    /// except `Classification` is a feature; labels are remapped {1,2} -> {0,1}.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        let path = path.as_ref();
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
        let label_idx = headers
            .iter()
            .position(|h| h == LABEL_COLUMN)
            .ok_or_else(|| DatasetError::MissingColumn(LABEL_COLUMN.into()))?;
        let column_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label_idx)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (row_no, record) in reader.records().enumerate() {
            let record = record.map_err(|e| csv_err(path, e))?;
            for (i, cell) in record.iter().enumerate() {
                let parsed = cell.trim().parse::<f64>().map_err(|_| {
                    DatasetError::NonNumericCell {
                        row: row_no + 1,
                        column: headers.get(i).unwrap_or("").to_string(),
                        cell: cell.into(),
                    }
                })?;
                if i == label_idx {
                    labels.push(parse_label(parsed, row_no + 1)?);
                } else {
                    values.push(parsed);
                }
            }
        }
        if labels.is_empty() {
            return Err(DatasetError::EmptyFile);
        }
        Self::new(column_names, values, labels)
    }

    /// SHA-256 of the exact CSV serialization; identifies a dataset across
    /// report files.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_csv_string().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Insulin-resistance index from fasting insulin (uU/mL) and glucose (mg/dL):
/// `insulin * glucose / 405.36`.
pub fn compute_homa(insulin: f64, glucose: f64) -> Result<f64, DatasetError> {
    if !(insulin > 0.0) || !insulin.is_finite() {
        return Err(DatasetError::NonPositiveInput(insulin));
    }
    if !(glucose > 0.0) || !glucose.is_finite() {
        return Err(DatasetError::NonPositiveInput(glucose));
    }
    Ok(insulin * glucose / HOMA_DIVISOR)
}

/// Binary indicators (high_bmi, obesity) at BMI >= 25 and BMI >= 30.
pub fn derive_bmi_flags(bmi: f64) -> Result<(u8, u8), DatasetError> {
    if !(bmi > 0.0) || !bmi.is_finite() {
        return Err(DatasetError::NonPositiveInput(bmi));
    }
    Ok((
        u8::from(bmi >= HIGH_BMI_THRESHOLD),
        u8::from(bmi >= OBESITY_THRESHOLD),
    ))
}

/// Load and validate patient records from a clinical CSV.
pub fn load_patients(
    path: impl AsRef<Path>,
    schema: &ColumnSchema,
) -> Result<Vec<PatientRecord>, DatasetError> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| -> Result<usize, DatasetError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.into()))
    };
    let age_i = col(&schema.age)?;
    let bmi_i = col(&schema.bmi)?;
    let glucose_i = col(&schema.glucose)?;
    let insulin_i = col(&schema.insulin)?;
    let homa_i = schema.homa.as_deref().map(col).transpose()?;
    let leptin_i = col(&schema.leptin)?;
    let adiponectin_i = col(&schema.adiponectin)?;
    let resistin_i = col(&schema.resistin)?;
    let mcp1_i = col(&schema.mcp1)?;
    let label_i = col(&schema.label)?;

    let mut records = Vec::new();
    for (row_no, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let row = row_no + 1;
        let cell = |i: usize, column: &str| -> Result<f64, DatasetError> {
            let raw = record.get(i).unwrap_or("");
            raw.trim().parse().map_err(|_| DatasetError::NonNumericCell {
                row,
                column: column.into(),
                cell: raw.into(),
            })
        };
        let age = cell(age_i, &schema.age)?;
        let bmi = cell(bmi_i, &schema.bmi)?;
        let glucose = cell(glucose_i, &schema.glucose)?;
        let insulin = cell(insulin_i, &schema.insulin)?;
        let leptin = cell(leptin_i, &schema.leptin)?;
        let adiponectin = cell(adiponectin_i, &schema.adiponectin)?;
        let resistin = cell(resistin_i, &schema.resistin)?;
        let mcp1 = cell(mcp1_i, &schema.mcp1)?;
        let label_raw = cell(label_i, &schema.label)?;

        let range = |field: &'static str,
                     value: f64,
                     ok: bool,
                     constraint: &'static str|
         -> Result<f64, DatasetError> {
            if ok && value.is_finite() {
                Ok(value)
            } else {
                Err(DatasetError::RangeViolation { row, field, value, constraint })
            }
        };
        let age = range("age", age, (18.0..=120.0).contains(&age), "18 <= age <= 120")?;
        let bmi = range("bmi", bmi, (10.0..=70.0).contains(&bmi), "10 <= bmi <= 70")?;
        let glucose = range("glucose", glucose, glucose > 0.0, "glucose > 0")?;
        let insulin = range("insulin", insulin, insulin > 0.0, "insulin > 0")?;
        let leptin = range("leptin", leptin, leptin > 0.0, "leptin > 0")?;
        let adiponectin = range("adiponectin", adiponectin, adiponectin > 0.0, "adiponectin > 0")?;
        let resistin = range("resistin", resistin, resistin > 0.0, "resistin > 0")?;
        let mcp1 = range("mcp1", mcp1, mcp1 > 0.0, "mcp1 > 0")?;
        let homa = match homa_i {
            Some(i) => {
                let name = schema.homa.as_deref().unwrap_or("HOMA");
                let v = cell(i, name)?;
                range("homa", v, v > 0.0, "homa > 0")?
            }
            None => compute_homa(insulin, glucose)?,
        };
        if label_raw != 1.0 && label_raw != 2.0 {
            return Err(DatasetError::RangeViolation {
                row,
                field: "label",
                value: label_raw,
                constraint: "label in {1 = healthy, 2 = cancer}",
            });
        }
        records.push(PatientRecord {
            age,
            bmi,
            glucose,
            insulin,
            homa,
            leptin,
            adiponectin,
            resistin,
            mcp1,
            label: (label_raw as u8) - 1,
        });
    }
    if records.is_empty() {
        return Err(DatasetError::EmptyFile);
    }
    log::info!("loaded {} patient records from {}", records.len(), path.display());
    Ok(records)
}

/// Join the relative-risk tables onto the records and assemble the full
/// 15-column candidate feature matrix. Deterministic and order-preserving.
pub fn join_relative_risks(
    records: &[PatientRecord],
    age_table: &RiskTable,
    bmi_table: &RiskTable,
) -> Result<FeatureMatrix, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::EmptyFile);
    }
    let mut values = Vec::with_capacity(records.len() * FEATURE_COLUMNS.len());
    let mut labels = Vec::with_capacity(records.len());
    for r in records {
        let gbd = age_table.lookup(r.age)?;
        let liu = bmi_table.lookup(r.bmi)?;
        let (high_bmi, obesity) = derive_bmi_flags(r.bmi)?;
        values.extend_from_slice(&[
            r.age,
            r.bmi,
            r.glucose,
            r.insulin,
            r.homa,
            r.leptin,
            r.adiponectin,
            r.resistin,
            r.mcp1,
            liu.rr_center,
            gbd.rr_center,
            gbd.rr_lower,
            gbd.rr_upper,
            f64::from(high_bmi),
            f64::from(obesity),
        ]);
        labels.push(r.label);
    }
    FeatureMatrix::new(
        FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        values,
        labels,
    )
}

/// Per-column summary in the shape of a descriptive-statistics table.
#[derive(Debug, Clone, Serialize)]
pub struct ColumnSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean, sample standard deviation, min, and max for every column.
pub fn describe(matrix: &FeatureMatrix) -> Result<Vec<ColumnSummary>, DatasetError> {
    if matrix.n_rows() < 2 {
        return Err(DatasetError::TooFewRows(matrix.n_rows()));
    }
    Ok(matrix
        .column_names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = matrix.column(j);
            let (mean, std) = crate::stats::mean_std(&col);
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ColumnSummary { name: name.clone(), mean, std, min, max }
        })
        .collect())
}
