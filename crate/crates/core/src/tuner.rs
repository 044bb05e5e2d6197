//! Period-driven window tuning.
//!
//! Covariates are selected once on the raw series. The target's candidate
//! periods then serve as window sizes: each one is windowed, split, trained and
//! scored, and the lowest held-out RMSE wins. RMSE is not assumed to move
//! monotonically with the window size; the winner is found by plain comparison.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{RawSeries, SplitSpec};
use crate::error::{Error, Result};
use crate::importance::{
    fit_forest, rank_importances, select_features, FeatureSet, ForestConfig, ImportanceRanking,
    DEFAULT_THRESHOLD,
};
use crate::lstm::{train_holdout, Holdout, TrainConfig, TrainedModel};
use crate::matrix::Matrix;
use crate::period::{cycle, PeriodSet};
use crate::rng::{derive_seed, stream};
use crate::windowing::{data_transform, SupervisedSet, WindowMode, WindowSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub forest: ForestConfig,
    pub importance_threshold: f64,
    pub train_fraction: f64,
    pub window_mode: WindowMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            train: TrainConfig::default(),
            forest: ForestConfig::default(),
            importance_threshold: DEFAULT_THRESHOLD,
            train_fraction: 2.0 / 3.0,
            window_mode: WindowMode::Block,
        }
    }
}

/// Outcome of covariate selection: which raw columns feed the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Importances over raw-series column indices.
    pub ranking: ImportanceRanking,
    pub features: FeatureSet,
    /// Names of the reduced columns: selected covariates in ranking order, then the target.
    pub column_names: Vec<String>,
    /// Raw-series index of each reduced column.
    pub source_columns: Vec<usize>,
}

/// The reduced series, target last.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSeries {
    pub selection: Selection,
    pub matrix: Matrix,
    pub target: Vec<f64>,
}

impl PreparedSeries {
    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn window(&self, spec: WindowSpec) -> Result<SupervisedSet> {
        data_transform(&self.matrix, &self.selection.column_names, spec)
    }
}

/// Ranks covariates with a regression forest (rows treated as independent
/// samples) and keeps the smallest prefix whose weight exceeds `threshold`.
pub fn prepare(
    series: &RawSeries,
    forest: &ForestConfig,
    threshold: f64,
    seed: u64,
) -> Result<PreparedSeries> {
    let covariates = series.covariate_indices();
    let x = series.values().select_columns(&covariates);
    let target = series.target();
    let config = ForestConfig {
        seed: derive_seed(seed, stream::FOREST),
        ..forest.clone()
    };
    let fitted = fit_forest(&x, &target, &config)?;
    let mut ranking = rank_importances(&fitted);
    for entry in &mut ranking.entries {
        entry.column = covariates[entry.column];
    }
    let features = select_features(&ranking, threshold)?;

    let mut source_columns = features.selected.clone();
    source_columns.push(series.target_index());
    let column_names = source_columns
        .iter()
        .map(|&c| series.column_names()[c].clone())
        .collect();
    Ok(PreparedSeries {
        matrix: series.values().select_columns(&source_columns),
        target,
        selection: Selection {
            ranking,
            features,
            column_names,
            source_columns,
        },
    })
}

/// Trains and scores one candidate window size.
pub trait CandidateTrainer: Sync {
    type Model: Send;

    fn train_candidate(&self, set: &SupervisedSet, n: usize) -> Result<Self::Model>;

    /// Held-out RMSE of a trained candidate.
    fn score(model: &Self::Model) -> f64;
}

/// A trained candidate together with the split it was scored on.
#[derive(Debug, Clone)]
pub struct Fitted {
    pub trained: TrainedModel,
    pub holdout: Holdout,
}

/// Split and initialization seeds for window size `n`.
pub fn candidate_seeds(seed: u64, n: usize) -> (u64, u64) {
    let split = derive_seed(derive_seed(seed, stream::SPLIT), n as u64);
    let init = derive_seed(derive_seed(seed, stream::INIT), n as u64);
    (split, init)
}

#[derive(Debug, Clone)]
pub struct LstmTrainer {
    pub config: TrainConfig,
    pub train_fraction: f64,
    pub seed: u64,
}

impl LstmTrainer {
    pub fn split_for(&self, n: usize) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: candidate_seeds(self.seed, n).0,
        }
    }
}

impl CandidateTrainer for LstmTrainer {
    type Model = Fitted;

    fn train_candidate(&self, set: &SupervisedSet, n: usize) -> Result<Fitted> {
        let (_, init) = candidate_seeds(self.seed, n);
        let config = TrainConfig {
            seed: init,
            ..self.config.clone()
        };
        let (trained, holdout) = train_holdout(set, &self.split_for(n), &config)?;
        Ok(Fitted { trained, holdout })
    }

    fn score(model: &Fitted) -> f64 {
        model.trained.test_rmse
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub n: usize,
    /// `None` when the candidate was skipped.
    pub test_rmse: Option<f64>,
    pub skipped: Option<String>,
    /// Wall-clock training time; not serialized so trace files stay reproducible.
    #[serde(skip)]
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct TunedResult<M> {
    pub best: M,
    pub best_n: usize,
    pub best_rmse: f64,
    /// One entry per tried period, ascending `n`.
    pub trace: Vec<TraceEntry>,
    pub periods: PeriodSet,
    pub selection: Selection,
    pub mode: WindowMode,
}

/// Trains every period in `periods` and keeps the lowest-RMSE model.
pub fn tune_periods<T: CandidateTrainer>(
    prepared: &PreparedSeries,
    periods: PeriodSet,
    mode: WindowMode,
    trainer: &T,
) -> Result<TunedResult<T::Model>> {
    if periods.is_empty() {
        return Err(Error::NoPeriods);
    }
    let d = prepared.rows();
    let outcomes: Vec<(TraceEntry, Option<T::Model>)> = periods
        .periods
        .par_iter()
        .map(|&n| {
            let skip = |reason: String| {
                Ok((
                    TraceEntry {
                        n,
                        test_rmse: None,
                        skipped: Some(reason),
                        wall_ms: 0.0,
                    },
                    None,
                ))
            };
            if 2 * n >= d {
                return skip(format!("window {n} is not below half of {d} rows"));
            }
            let set = prepared.window(WindowSpec { n, mode })?;
            if set.len() < 3 {
                return skip(format!("window {n} leaves only {} rows", set.len()));
            }
            let start = Instant::now();
            let model = trainer.train_candidate(&set, n)?;
            let entry = TraceEntry {
                n,
                test_rmse: Some(T::score(&model)),
                skipped: None,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            };
            Ok((entry, Some(model)))
        })
        .collect::<Result<_>>()?;

    let mut trace = Vec::with_capacity(outcomes.len());
    let mut best: Option<(usize, f64, T::Model)> = None;
    for (entry, model) in outcomes {
        if let (Some(model), Some(rmse)) = (model, entry.test_rmse) {
            if best.as_ref().map_or(true, |(_, best_rmse, _)| rmse < *best_rmse) {
                best = Some((entry.n, rmse, model));
            }
        }
        trace.push(entry);
    }
    let (best_n, best_rmse, best) = best.ok_or(Error::NoPeriods)?;
    Ok(TunedResult {
        best,
        best_n,
        best_rmse,
        trace,
        periods,
        selection: prepared.selection.clone(),
        mode,
    })
}

/// Full pipeline with a caller-supplied candidate trainer.
pub fn optimized_with<T: CandidateTrainer>(
    series: &RawSeries,
    config: &PipelineConfig,
    seed: u64,
    trainer: &T,
) -> Result<TunedResult<T::Model>> {
    let prepared = prepare(series, &config.forest, config.importance_threshold, seed)?;
    let periods = cycle(&prepared.target)?;
    tune_periods(&prepared, periods, config.window_mode, trainer)
}

/// Selects covariates, detects periods and returns the best LSTM over them.
pub fn optimized_lstm(
    series: &RawSeries,
    config: &PipelineConfig,
    seed: u64,
) -> Result<TunedResult<Fitted>> {
    optimized_with(series, config, seed, &lstm_trainer(config, seed))
}

pub fn lstm_trainer(config: &PipelineConfig, seed: u64) -> LstmTrainer {
    LstmTrainer {
        config: config.train.clone(),
        train_fraction: config.train_fraction,
        seed,
    }
}

/// One transform-and-train pass at a fixed window size on an already prepared series.
pub fn manual_run_prepared(
    prepared: &PreparedSeries,
    n: usize,
    config: &PipelineConfig,
    seed: u64,
) -> Result<Fitted> {
    let d = prepared.rows();
    if n < 1 || 2 * n >= d {
        return Err(Error::InvalidArgument(format!(
            "window size must satisfy 1 <= n < {d}/2, got {n}"
        )));
    }
    let set = prepared.window(WindowSpec {
        n,
        mode: config.window_mode,
    })?;
    lstm_trainer(config, seed).train_candidate(&set, n)
}

/// Fixed-window run that bypasses period detection. Uses the same selection and
/// seeds as the tuner, so `n = best_n` reproduces the tuned model exactly.
pub fn manual_run(
    series: &RawSeries,
    n: usize,
    config: &PipelineConfig,
    seed: u64,
) -> Result<(Fitted, Selection)> {
    let prepared = prepare(series, &config.forest, config.importance_threshold, seed)?;
    let fitted = manual_run_prepared(&prepared, n, config, seed)?;
    Ok((fitted, prepared.selection))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridAxis {
    SeqLen,
    Hidden,
    Epochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub axis: GridAxis,
    pub value: usize,
    pub test_rmse: f64,
    pub wall_ms: f64,
}

/// Trains one model per value of `axis` at window size `n`, other settings fixed.
pub fn grid_search(
    prepared: &PreparedSeries,
    n: usize,
    config: &PipelineConfig,
    seed: u64,
    axis: GridAxis,
    values: &[usize],
) -> Result<Vec<GridRow>> {
    values
        .iter()
        .map(|&value| {
            let mut cfg = config.clone();
            match axis {
                GridAxis::SeqLen => cfg.train.seq_len = value,
                GridAxis::Hidden => cfg.train.hidden_dim = value,
                GridAxis::Epochs => cfg.train.epochs = value,
            }
            let start = Instant::now();
            let fitted = manual_run_prepared(prepared, n, &cfg, seed)?;
            Ok(GridRow {
                axis,
                value,
                test_rmse: fitted.trained.test_rmse,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect()
}

pub const MODEL_FORMAT: &str = "flowcast-lstm";
pub const MODEL_VERSION: u32 = 1;

/// Serialized model: network, scaling, training config and the window/column
/// information needed to rebuild its inputs from a raw series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub window: WindowSpec,
    /// Covariate names in input order.
    pub covariates: Vec<String>,
    pub target: String,
    pub trained: TrainedModel,
}

impl ModelBundle {
    pub fn new(trained: TrainedModel, selection: &Selection, window: WindowSpec) -> Self {
        let names = &selection.column_names;
        ModelBundle {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            window,
            covariates: names[..names.len() - 1].to_vec(),
            target: names[names.len() - 1].clone(),
            trained,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: ModelBundle = serde_json::from_str(text)?;
        if bundle.format != MODEL_FORMAT || bundle.version != MODEL_VERSION {
            return Err(Error::InvalidData(format!(
                "unsupported model format {} v{}",
                bundle.format, bundle.version
            )));
        }
        Ok(bundle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Windows `series` the way the model was trained.
    pub fn supervised(&self, series: &RawSeries) -> Result<SupervisedSet> {
        let mut columns = Vec::with_capacity(self.covariates.len() + 1);
        let mut names = Vec::with_capacity(self.covariates.len() + 1);
        for name in self.covariates.iter().chain(std::iter::once(&self.target)) {
            let c = series
                .column_index(name)
                .ok_or_else(|| Error::InvalidData(format!("input lacks column {name:?}")))?;
            columns.push(c);
            names.push(name.clone());
        }
        data_transform(&series.values().select_columns(&columns), &names, self.window)
    }

    pub fn predict(&self, series: &RawSeries) -> Result<(SupervisedSet, Vec<f64>)> {
        let set = self.supervised(series)?;
        let predictions = self.trained.predict(&set)?;
        Ok((set, predictions))
    }
}
