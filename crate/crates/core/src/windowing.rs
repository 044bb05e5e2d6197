//! Turns a reduced time series (selected covariates followed by the target
//! column) into supervised rows by merging `n` consecutive time steps.
//!
//! Two layouts are supported:
//!
//! * [`WindowMode::Block`]: non-overlapping blocks of `n` rows. The tail that does
//!   not fill a whole block is dropped. The flattened block loses its final cell,
//!   which becomes the target.
//! * [`WindowMode::Slide`]: one row per time step `i >= n`, holding every value of
//!   rows `i-n..i` plus the covariates of row `i`; the target is row `i`'s last cell.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    #[default]
    Block,
    Slide,
}

impl FromStr for WindowMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "block" => Ok(WindowMode::Block),
            "slide" => Ok(WindowMode::Slide),
            other => Err(Error::InvalidArgument(format!(
                "window mode must be `block` or `slide`, got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for WindowMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WindowMode::Block => "block",
            WindowMode::Slide => "slide",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub n: usize,
    pub mode: WindowMode,
}

impl WindowSpec {
    pub fn block(n: usize) -> Self {
        WindowSpec {
            n,
            mode: WindowMode::Block,
        }
    }

    pub fn slide(n: usize) -> Self {
        WindowSpec {
            n,
            mode: WindowMode::Slide,
        }
    }
}

/// Where a feature position was copied from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSlot {
    /// Time offset relative to the target row, always `<= 0`.
    pub offset: i64,
    /// Column of the reduced series.
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedSet {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub spec: WindowSpec,
    pub layout: Vec<FeatureSlot>,
    pub column_names: Vec<String>,
    /// Source row of each target value. Strictly increasing for a freshly
    /// transformed set and preserved by row selection.
    pub target_rows: Vec<usize>,
}

impl SupervisedSet {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    /// Index of the target column in the reduced series.
    pub fn target_column(&self) -> usize {
        self.column_names.len() - 1
    }

    /// Sub-set of rows, in the order given.
    pub fn select(&self, rows: &[usize]) -> SupervisedSet {
        SupervisedSet {
            x: self.x.select_rows(rows),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            spec: self.spec,
            layout: self.layout.clone(),
            column_names: self.column_names.clone(),
            target_rows: rows.iter().map(|&r| self.target_rows[r]).collect(),
        }
    }
}

fn check_window(d: usize, m: usize, n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::InvalidArgument("window size must be at least 1".into()));
    }
    if 2 * n > d {
        return Err(Error::InvalidArgument(format!(
            "window size {n} exceeds half of the {d} available rows"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidArgument(
            "windowing needs at least one covariate and the target".into(),
        ));
    }
    Ok(())
}

/// Windows `series` (target in the last column) into a supervised set.
pub fn data_transform(
    series: &Matrix,
    column_names: &[String],
    spec: WindowSpec,
) -> Result<SupervisedSet> {
    let (d, m) = (series.rows(), series.cols());
    if column_names.len() != m {
        return Err(Error::Shape(format!(
            "{} column names for {m} columns",
            column_names.len()
        )));
    }
    check_window(d, m, spec.n)?;
    let n = spec.n;

    let (x, y, target_rows) = match spec.mode {
        WindowMode::Block => {
            let windows = d / n;
            let width = n * m - 1;
            let mut x = Matrix::zeros(windows, width);
            let mut y = Vec::with_capacity(windows);
            let mut target_rows = Vec::with_capacity(windows);
            for w in 0..windows {
                let start = w * n;
                let flat = &series.as_slice()[start * m..(start + n) * m];
                x.row_mut(w).copy_from_slice(&flat[..width]);
                y.push(flat[width]);
                target_rows.push(start + n - 1);
            }
            (x, y, target_rows)
        }
        WindowMode::Slide => {
            let windows = d - n;
            let width = n * m + m - 1;
            let mut x = Matrix::zeros(windows, width);
            let mut y = Vec::with_capacity(windows);
            let mut target_rows = Vec::with_capacity(windows);
            for (w, i) in (n..d).enumerate() {
                let flat = &series.as_slice()[(i - n) * m..(i + 1) * m];
                x.row_mut(w).copy_from_slice(&flat[..width]);
                y.push(flat[width]);
                target_rows.push(i);
            }
            (x, y, target_rows)
        }
    };

    Ok(SupervisedSet {
        x,
        y,
        spec,
        layout: layout_for(spec, m),
        column_names: column_names.to_vec(),
        target_rows,
    })
}

fn layout_for(spec: WindowSpec, m: usize) -> Vec<FeatureSlot> {
    let steps = match spec.mode {
        WindowMode::Block => spec.n,
        WindowMode::Slide => spec.n + 1,
    };
    let mut layout = Vec::with_capacity(steps * m - 1);
    for step in 0..steps {
        let offset = step as i64 - (steps as i64 - 1);
        for column in 0..m {
            if offset == 0 && column == m - 1 {
                break;
            }
            layout.push(FeatureSlot { offset, column });
        }
    }
    layout
}

/// Human-readable label per feature position, e.g. `pressure@t-2`.
pub fn describe_layout(set: &SupervisedSet) -> Vec<String> {
    set.layout
        .iter()
        .map(|slot| {
            let name = &set.column_names[slot.column];
            if slot.offset == 0 {
                format!("{name}@t")
            } else {
                format!("{name}@t{}", slot.offset)
            }
        })
        .collect()
}
