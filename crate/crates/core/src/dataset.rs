//! Loading, validation, scaling and holdout splitting of multivariate series.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::rng_from;
use crate::windowing::SupervisedSet;

/// Time-ordered readings, one row per time step (oldest first), one column per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    values: Matrix,
    column_names: Vec<String>,
    target_index: usize,
}

impl RawSeries {
    pub fn new(values: Matrix, column_names: Vec<String>, target_index: usize) -> Result<Self> {
        let (d, m) = (values.rows(), values.cols());
        if m < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 columns, found {m}"
            )));
        }
        if d < 2 {
            return Err(Error::InvalidData(format!("need at least 2 rows, found {d}")));
        }
        if column_names.len() != m {
            return Err(Error::Shape(format!(
                "{} column names for {m} columns",
                column_names.len()
            )));
        }
        if target_index >= m {
            return Err(Error::InvalidArgument(format!(
                "target index {target_index} out of range for {m} columns"
            )));
        }
        if let Some(pos) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {:?}",
                pos / m + 1,
                column_names[pos % m]
            )));
        }
        Ok(RawSeries {
            values,
            column_names,
            target_index,
        })
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn target_index(&self) -> usize {
        self.target_index
    }

    pub fn target_name(&self) -> &str {
        &self.column_names[self.target_index]
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn cols(&self) -> usize {
        self.values.cols()
    }

    pub fn target(&self) -> Vec<f64> {
        self.values.column(self.target_index)
    }

    /// Every column except the target, in file order.
    pub fn covariate_indices(&self) -> Vec<usize> {
        (0..self.cols()).filter(|&c| c != self.target_index).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// Writes the series as CSV with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(&self.column_names)?;
        for row in self.values.row_iter() {
            writer.write_record(row.iter().map(|v| v.to_string()))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Which column holds the target.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    /// The last column.
    #[default]
    Last,
    Index(usize),
    Name(String),
}

impl FromStr for ColumnRef {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.to_string()),
        })
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Last => f.write_str("<last>"),
            ColumnRef::Index(i) => write!(f, "{i}"),
            ColumnRef::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub target: ColumnRef,
    /// Columns dropped by name before parsing. Their values must be strictly
    /// increasing (numerically, or lexicographically when not numeric).
    pub timestamp_columns: Vec<String>,
}

/// Reads a headed, comma-separated file of real numbers.
pub fn load_csv(path: &Path, options: &LoadOptions) -> Result<RawSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();

    let keep: Vec<usize> = (0..header.len())
        .filter(|&c| !options.timestamp_columns.contains(&header[c]))
        .collect();
    let stamps: Vec<usize> = (0..header.len())
        .filter(|&c| options.timestamp_columns.contains(&header[c]))
        .collect();
    let names: Vec<String> = keep.iter().map(|&c| header[c].clone()).collect();
    if names.len() < 2 {
        return Err(Error::InvalidData(format!(
            "need at least 2 numeric columns, found {}",
            names.len()
        )));
    }

    let mut data = Vec::new();
    let mut previous_stamps: Vec<Option<String>> = vec![None; stamps.len()];
    let mut rows = 0usize;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(Error::InvalidData(format!(
                "row {row} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        for &c in &keep {
            let raw = record[c].trim();
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => data.push(v),
                _ => {
                    return Err(Error::Parse {
                        row,
                        column: header[c].clone(),
                        value: raw.to_string(),
                    })
                }
            }
        }
        for (k, &c) in stamps.iter().enumerate() {
            let current = record[c].trim().to_string();
            if let Some(prev) = &previous_stamps[k] {
                if !stamp_increases(prev, &current) {
                    return Err(Error::InvalidData(format!(
                        "row {row}: timestamp {current:?} in column {:?} does not increase",
                        header[c]
                    )));
                }
            }
            previous_stamps[k] = Some(current);
        }
        rows += 1;
    }
    if rows < 2 {
        return Err(Error::InvalidData(format!("need at least 2 rows, found {rows}")));
    }

    let target_index = match &options.target {
        ColumnRef::Last => names.len() - 1,
        ColumnRef::Name(name) => names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no column named {name:?}")))?,
        ColumnRef::Index(i) => {
            // A bare number that is also a column name refers to that column.
            names.iter().position(|n| *n == i.to_string()).unwrap_or(*i)
        }
    };
    let values = Matrix::from_vec(rows, names.len(), data)?;
    RawSeries::new(values, names, target_index)
}

fn stamp_increases(prev: &str, current: &str) -> bool {
    match (prev.parse::<f64>(), current.parse::<f64>()) {
        (Ok(a), Ok(b)) => b > a,
        _ => current > prev,
    }
}

/// Min-max scaling of one column into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub min: f64,
    pub max: f64,
}

impl ColumnScale {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let (min, max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        if min > max {
            // no values at all
            return ColumnScale { min: 0.0, max: 0.0 };
        }
        ColumnScale { min, max }
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn is_constant(&self) -> bool {
        self.max == self.min
    }

    /// Constant columns map to 0.5.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        if self.is_constant() {
            0.5
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    #[inline]
    pub fn invert(&self, scaled: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            scaled * (self.max - self.min) + self.min
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    #[default]
    MinMax01,
}

/// Per-column min-max statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mode: ScaleMode,
    pub columns: Vec<usize>,
    pub scales: Vec<ColumnScale>,
}

impl Normalizer {
    /// Fits min and max over all rows of each listed column.
    pub fn fit(series: &RawSeries, columns: &[usize]) -> Result<Self> {
        Self::fit_matrix(series.values(), columns)
    }

    pub fn fit_matrix(values: &Matrix, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidArgument("no columns to normalize".into()));
        }
        if let Some(&bad) = columns.iter().find(|&&c| c >= values.cols()) {
            return Err(Error::InvalidArgument(format!("column {bad} out of range")));
        }
        let scales = columns
            .iter()
            .map(|&c| ColumnScale::fit(values.row_iter().map(|row| row[c])))
            .collect();
        Ok(Normalizer {
            mode: ScaleMode::MinMax01,
            columns: columns.to_vec(),
            scales,
        })
    }

    pub fn scale(&self, column: usize) -> Option<&ColumnScale> {
        self.columns
            .iter()
            .position(|&c| c == column)
            .map(|k| &self.scales[k])
    }

    pub fn apply(&self, column: usize, x: f64) -> Option<f64> {
        self.scale(column).map(|s| s.apply(x))
    }

    pub fn invert(&self, column: usize, scaled: f64) -> Option<f64> {
        self.scale(column).map(|s| s.invert(scaled))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 2.0 / 3.0,
            seed: 0,
        }
    }
}

/// Random partition of `0..rows` into (train, test); both sorted ascending.
pub fn holdout_indices(rows: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let train_len = (spec.train_fraction * rows as f64).round() as usize;
    if rows < 3 || train_len == 0 || train_len >= rows {
        return Err(Error::InvalidData(format!(
            "{rows} rows cannot be split into non-empty train and test parts"
        )));
    }
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut rng_from(spec.seed));
    let mut train = order[..train_len].to_vec();
    let mut test = order[train_len..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Splits a supervised set into (train, test); rows keep chronological order.
pub fn holdout_split(
    set: &SupervisedSet,
    spec: &SplitSpec,
) -> Result<(SupervisedSet, SupervisedSet)> {
    let (train, test) = holdout_indices(set.len(), spec)?;
    Ok((set.select(&train), set.select(&test)))
}
