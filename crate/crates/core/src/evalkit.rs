//! Error metrics, baseline predictors, method comparison and plot-data export.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::RawSeries;
use crate::error::{Error, Result};
use crate::importance::{fit_forest, forest_predict, ForestConfig};
use crate::period::cycle;
use crate::rng::{derive_seed, stream};
use crate::tuner::{
    lstm_trainer, prepare, tune_periods, CandidateTrainer, Fitted, GridAxis, GridRow,
    PipelineConfig, TunedResult,
};
use crate::windowing::{SupervisedSet, WindowSpec};

/// Root-mean-square error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} observations",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("rmse of empty vectors".into()));
    }
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

/// Coefficient of determination; `None` when the observations are constant.
pub fn r2(pred: &[f64], truth: &[f64]) -> Option<f64> {
    if pred.len() != truth.len() || truth.is_empty() {
        return None;
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let sst: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if sst == 0.0 {
        return None;
    }
    let sse: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Some(1.0 - sse / sst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Predicts the previous observed target value.
    Persistence,
    RandomForest,
    /// LSTM on unit windows.
    LstmPlain,
    /// LSTM at the best detected period.
    LstmTuned,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Persistence,
        Method::RandomForest,
        Method::LstmPlain,
        Method::LstmTuned,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Persistence => "persistence",
            Method::RandomForest => "random-forest",
            Method::LstmPlain => "lstm-plain",
            Method::LstmTuned => "lstm-tuned",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub name: Method,
    pub rmse: f64,
    pub r2: Option<f64>,
    pub wall_ms: f64,
    /// Window size the method was evaluated at.
    pub window: usize,
    /// Source rows of the evaluated test targets.
    #[serde(skip)]
    pub test_rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub train_fraction: f64,
    pub seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Reference results on the dataset the method was designed for. Carried
/// as context only; they are not reproducible without that data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceResults {
    pub random_forest_rmse: f64,
    pub lstm_rmse: f64,
    pub lstm_tuned_rmse: f64,
    pub improvement_pct: f64,
}

impl Default for ReferenceResults {
    fn default() -> Self {
        ReferenceResults {
            random_forest_rmse: 40.21,
            lstm_rmse: 19.87,
            lstm_tuned_rmse: 9.13,
            improvement_pct: 54.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Sorted by RMSE, ascending.
    pub methods: Vec<MethodResult>,
    /// `(plain - tuned) / plain * 100`, when both LSTM variants ran and plain RMSE > 0.
    pub improvement_pct: Option<f64>,
    pub seed: u64,
    /// The unit-window split shared by persistence, random forest and plain LSTM.
    pub split: SplitInfo,
    pub tuned_window: Option<usize>,
    pub reference: ReferenceResults,
}

impl ComparisonReport {
    pub fn get(&self, method: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.name == method)
    }
}

pub fn improvement_pct(plain: f64, tuned: f64) -> Option<f64> {
    (plain > 0.0).then(|| (plain - tuned) / plain * 100.0)
}

fn persistence(target: &[f64], test: &SupervisedSet) -> Vec<f64> {
    test.target_rows
        .iter()
        .map(|&r| target[r.saturating_sub(1)])
        .collect()
}

/// Evaluates `methods` on `series`. Methods working on unit windows share one
/// split; the tuned LSTM is scored on the split of its own window size.
pub fn compare(
    series: &RawSeries,
    methods: &[Method],
    config: &PipelineConfig,
    seed: u64,
) -> Result<ComparisonReport> {
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods to compare".into()));
    }
    let prepared = prepare(series, &config.forest, config.importance_threshold, seed)?;
    let unit = prepared.window(WindowSpec::block(1))?;
    let trainer = lstm_trainer(config, seed);
    let split = trainer.split_for(1);
    let (train_set, test_set) = crate::dataset::holdout_split(&unit, &split)?;
    let target = series.target();

    let mut results = Vec::new();
    let mut tuned_window = None;
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    for method in methods {
        let start = Instant::now();
        let (predictions, truth, window, test_rows) = match method {
            Method::Persistence => (
                persistence(&target, &test_set),
                test_set.y.clone(),
                1,
                test_set.target_rows.clone(),
            ),
            Method::RandomForest => {
                let forest_config = ForestConfig {
                    seed: derive_seed(seed, stream::FOREST ^ 0xF0),
                    ..config.forest.clone()
                };
                let forest = fit_forest(&train_set.x, &train_set.y, &forest_config)?;
                (
                    forest_predict(&forest, &test_set.x)?,
                    test_set.y.clone(),
                    1,
                    test_set.target_rows.clone(),
                )
            }
            Method::LstmPlain => {
                let fitted = trainer.train_candidate(&unit, 1)?;
                let pred = fitted.trained.predict(&fitted.holdout.test)?;
                (pred, fitted.holdout.test.y.clone(), 1, fitted.holdout.test.target_rows.clone())
            }
            Method::LstmTuned => {
                let periods = cycle(&prepared.target)?;
                let tuned = tune_periods(&prepared, periods, config.window_mode, &trainer)?;
                tuned_window = Some(tuned.best_n);
                let test = &tuned.best.holdout.test;
                let pred = tuned.best.trained.predict(test)?;
                (pred, test.y.clone(), tuned.best_n, test.target_rows.clone())
            }
        };
        results.push(MethodResult {
            name: method,
            rmse: rmse(&predictions, &truth)?,
            r2: r2(&predictions, &truth),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            window,
            test_rows,
        });
    }

    let improvement = match (
        results.iter().find(|r| r.name == Method::LstmPlain),
        results.iter().find(|r| r.name == Method::LstmTuned),
    ) {
        (Some(plain), Some(tuned)) => improvement_pct(plain.rmse, tuned.rmse),
        _ => None,
    };
    results.sort_by(|a, b| a.rmse.total_cmp(&b.rmse).then(a.name.cmp(&b.name)));

    Ok(ComparisonReport {
        methods: results,
        improvement_pct: improvement,
        seed,
        split: SplitInfo {
            train_fraction: split.train_fraction,
            seed: split.seed,
            train_rows: train_set.len(),
            test_rows: test_set.len(),
        },
        tuned_window,
        reference: ReferenceResults::default(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    RmseVsHidden,
    RmseVsIterations,
    PredVsActual,
    RmseVsN,
    LossCurves,
    MethodComparison,
}

impl PlotKind {
    pub const ALL: [PlotKind; 6] = [
        PlotKind::RmseVsHidden,
        PlotKind::RmseVsIterations,
        PlotKind::PredVsActual,
        PlotKind::RmseVsN,
        PlotKind::LossCurves,
        PlotKind::MethodComparison,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::RmseVsHidden => "rmse-vs-hidden",
            PlotKind::RmseVsIterations => "rmse-vs-iterations",
            PlotKind::PredVsActual => "pred-vs-actual",
            PlotKind::RmseVsN => "rmse-vs-n",
            PlotKind::LossCurves => "loss-curves",
            PlotKind::MethodComparison => "method-comparison",
        }
    }

    pub fn header(self) -> &'static [&'static str] {
        match self {
            PlotKind::RmseVsHidden => &["hidden", "test_rmse"],
            PlotKind::RmseVsIterations => &["epochs", "test_rmse"],
            PlotKind::PredVsActual => &["row", "actual", "predicted"],
            PlotKind::RmseVsN => &["n", "test_rmse"],
            PlotKind::LossCurves => &["epoch", "train_rmse", "test_rmse"],
            PlotKind::MethodComparison => &["method", "rmse"],
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown plot kind {s:?}")))
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What a plot is drawn from.
pub enum PlotSource<'a> {
    Tuned(&'a TunedResult<Fitted>),
    Fitted(&'a Fitted),
    Grid(&'a [GridRow]),
    Comparison(&'a ComparisonReport),
}

fn plot_rows(source: &PlotSource<'_>, kind: PlotKind) -> Result<Vec<Vec<String>>> {
    let mismatch = || {
        Err(Error::InvalidArgument(format!(
            "plot kind {kind} cannot be drawn from this result"
        )))
    };
    let fitted = match source {
        PlotSource::Tuned(t) => Some(&t.best),
        PlotSource::Fitted(f) => Some(*f),
        _ => None,
    };
    let rows = match (kind, source) {
        (PlotKind::RmseVsN, PlotSource::Tuned(t)) => t
            .trace
            .iter()
            .filter_map(|e| e.test_rmse.map(|r| vec![e.n.to_string(), r.to_string()]))
            .collect(),
        (PlotKind::RmseVsHidden, PlotSource::Grid(rows))
        | (PlotKind::RmseVsIterations, PlotSource::Grid(rows)) => {
            let axis = if kind == PlotKind::RmseVsHidden {
                GridAxis::Hidden
            } else {
                GridAxis::Epochs
            };
            if rows.iter().any(|r| r.axis != axis) {
                return mismatch();
            }
            rows.iter()
                .map(|r| vec![r.value.to_string(), r.test_rmse.to_string()])
                .collect()
        }
        (PlotKind::MethodComparison, PlotSource::Comparison(report)) => report
            .methods
            .iter()
            .map(|m| vec![m.name.to_string(), m.rmse.to_string()])
            .collect(),
        (PlotKind::LossCurves, _) if fitted.is_some() => {
            let trained = &fitted.unwrap().trained;
            trained
                .train_loss_curve
                .iter()
                .zip(&trained.test_loss_curve)
                .enumerate()
                .map(|(e, (tr, te))| vec![(e + 1).to_string(), tr.to_string(), te.to_string()])
                .collect()
        }
        (PlotKind::PredVsActual, _) if fitted.is_some() => {
            let fitted = fitted.unwrap();
            let test = &fitted.holdout.test;
            let pred = fitted.trained.predict(test)?;
            test.target_rows
                .iter()
                .zip(&test.y)
                .zip(pred)
                .map(|((row, actual), p)| vec![row.to_string(), actual.to_string(), p.to_string()])
                .collect()
        }
        _ => return mismatch(),
    };
    Ok(rows)
}

/// Writes the CSV behind one plot. Returns the number of data rows.
pub fn emit_plot_data(source: &PlotSource<'_>, kind: PlotKind, path: &Path) -> Result<usize> {
    let rows = plot_rows(source, kind)?;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(kind.header())?;
    for row in &rows {
        writer.write_record(row)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows.len())
}
