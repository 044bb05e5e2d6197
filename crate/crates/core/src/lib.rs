//! Multivariate time-series forecasting with a period-tuned LSTM.
//!
//! The pipeline ranks covariates with a regression forest and keeps the ones
//! carrying more than 95% of the importance, detects candidate periods of the
//! target from the lengths of its above-mean runs, windows the reduced series
//! at each of the five smallest periods, trains a single-layer LSTM per window
//! size and keeps the one with the lowest held-out RMSE.
//!
//! ```no_run
//! use flowcast::{gen_periodic, optimized_lstm, PipelineConfig, SynthSpec};
//!
//! let (series, _) = gen_periodic(&SynthSpec::scenario(4000, 20, 1)).unwrap();
//! let tuned = optimized_lstm(&series, &PipelineConfig::default(), 7).unwrap();
//! println!("best window {} with rmse {}", tuned.best_n, tuned.best_rmse);
//! ```

pub mod dataset;
pub mod error;
pub mod evalkit;
pub mod importance;
pub mod lstm;
pub mod matrix;
pub mod period;
pub mod rng;
pub mod synth;
pub mod tuner;
pub mod windowing;

pub use dataset::{
    holdout_indices, holdout_split, load_csv, ColumnRef, ColumnScale, LoadOptions, Normalizer,
    RawSeries, SplitSpec,
};
pub use error::{Error, Result};
pub use evalkit::{
    compare, emit_plot_data, r2, rmse, ComparisonReport, Method, PlotKind, PlotSource,
};
pub use importance::{
    fit_forest, forest_predict, rank_importances, select_features, FeatureSet, Forest,
    ForestConfig, ImportanceRanking,
};
pub use lstm::{LstmModel, TrainConfig, TrainedModel};
pub use matrix::Matrix;
pub use period::{cycle, regularize, BoundedHeap, PeriodSet};
pub use synth::{gen_periodic, GroundTruth, SynthSpec};
pub use tuner::{
    grid_search, manual_run, optimized_lstm, prepare, Fitted, GridAxis, ModelBundle,
    PipelineConfig, PreparedSeries, TunedResult,
};
pub use windowing::{data_transform, describe_layout, SupervisedSet, WindowMode, WindowSpec};
