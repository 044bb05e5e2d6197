//! Candidate periods of the target from the lengths of its positive runs.
//!
//! The target is min-max scaled and mean-centred, so a sign change marks a
//! crossing of the series mean. Each maximal run of strictly positive values
//! contributes its length; the five smallest distinct lengths are kept.

use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::dataset::ColumnScale;
use crate::error::{Error, Result};

pub const PERIOD_CAPACITY: usize = 5;

/// Keeps the `capacity` smallest distinct values pushed so far.
///
/// Backed by a max-heap so the largest retained value is the one evicted.
#[derive(Debug, Clone)]
pub struct BoundedHeap {
    capacity: usize,
    heap: BinaryHeap<usize>,
}

impl BoundedHeap {
    pub fn new(capacity: usize) -> Self {
        BoundedHeap {
            capacity,
            heap: BinaryHeap::with_capacity(capacity + 1),
        }
    }

    pub fn push(&mut self, value: usize) {
        if self.capacity == 0 || self.heap.iter().any(|&v| v == value) {
            return;
        }
        if self.heap.len() < self.capacity {
            self.heap.push(value);
        } else if let Some(&largest) = self.heap.peek() {
            if value < largest {
                self.heap.pop();
                self.heap.push(value);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Contents in ascending order.
    pub fn into_sorted_vec(self) -> Vec<usize> {
        self.heap.into_sorted_vec()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodSet {
    /// Up to five distinct positive-run lengths, ascending.
    pub periods: Vec<usize>,
    /// Every positive-run length in scan order, duplicates included.
    pub run_lengths: Vec<usize>,
}

impl PeriodSet {
    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn histogram(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for &len in &self.run_lengths {
            *hist.entry(len).or_insert(0) += 1;
        }
        hist
    }
}

/// Min-max scales `y` into `[0, 1]` and subtracts the scaled mean.
pub fn regularize(y: &[f64]) -> Result<Vec<f64>> {
    if y.len() < 2 {
        return Err(Error::InvalidArgument(
            "period detection needs at least 2 values".into(),
        ));
    }
    let scale = ColumnScale::fit(y.iter().copied());
    if scale.is_constant() {
        return Ok(vec![0.0; y.len()]);
    }
    let scaled: Vec<f64> = y.iter().map(|&v| scale.apply(v)).collect();
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    Ok(scaled.into_iter().map(|v| v - mean).collect())
}

/// Feeds a stream of run lengths through the bounded heap. Zero lengths are skipped.
pub fn smallest_periods(run_lengths: &[usize]) -> Vec<usize> {
    let mut heap = BoundedHeap::new(PERIOD_CAPACITY);
    for &len in run_lengths.iter().filter(|&&l| l > 0) {
        heap.push(len);
    }
    heap.into_sorted_vec()
}

/// Detects candidate periods of `y`.
pub fn cycle(y: &[f64]) -> Result<PeriodSet> {
    let centred = regularize(y)?;
    let mut run_lengths = Vec::new();
    let mut count = 0usize;
    for &v in &centred {
        if v > 0.0 {
            count += 1;
        } else if count > 0 {
            run_lengths.push(count);
            count = 0;
        }
    }
    // A run still open at the end of the series is never closed, hence not counted.
    Ok(PeriodSet {
        periods: smallest_periods(&run_lengths),
        run_lengths,
    })
}
