//! Run configuration: a TOML document whose values can be overridden from the
//! command line, either by dedicated flags or by `--set key=value`.

use std::path::Path;

use flowcast::dataset::{ColumnRef, LoadOptions};
use flowcast::lstm::TrainConfig;
use flowcast::tuner::PipelineConfig;
use flowcast::{ForestConfig, WindowMode, WindowSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Column name or 0-based index; the last column when absent.
    pub target_column: Option<ColumnRef>,
    pub timestamp_columns: Vec<String>,
    pub train_fraction: f64,
    pub seed: u64,
    pub forest: ForestSection,
    pub importance: ImportanceSection,
    pub window: WindowSection,
    pub lstm: LstmSection,
    pub grid: GridSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            target_column: None,
            timestamp_columns: Vec::new(),
            train_fraction: 2.0 / 3.0,
            seed: 0,
            forest: ForestSection::default(),
            importance: ImportanceSection::default(),
            window: WindowSection::default(),
            lstm: LstmSection::default(),
            grid: GridSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestSection {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestSection {
    fn default() -> Self {
        let d = ForestConfig::default();
        ForestSection {
            n_trees: d.n_trees,
            max_depth: d.max_depth,
            min_samples_leaf: d.min_samples_leaf,
            features_per_split: d.features_per_split,
            bootstrap: d.bootstrap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImportanceSection {
    pub threshold: f64,
}

impl Default for ImportanceSection {
    fn default() -> Self {
        ImportanceSection {
            threshold: flowcast::importance::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSection {
    pub mode: WindowMode,
    /// Fixed window size for `transform` and `train`.
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LstmSection {
    pub seq_len: usize,
    pub epochs: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub shuffle: bool,
    pub clip_norm: Option<f64>,
}

impl Default for LstmSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        LstmSection {
            seq_len: d.seq_len,
            epochs: d.epochs,
            hidden_dim: d.hidden_dim,
            learning_rate: d.learning_rate,
            shuffle: d.shuffle,
            clip_norm: d.clip_norm,
        }
    }
}

/// Values swept by `emit-plots`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub hidden: Vec<usize>,
    pub epochs: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            hidden: vec![10, 20, 50, 100, 200],
            epochs: vec![10, 50, 100, 500],
        }
    }
}

impl RunConfig {
    /// Reads `path` (if any), then applies `key=value` overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut doc = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut doc, item)?;
        }
        let config: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::usage(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::usage("train_fraction must lie in (0, 1)"));
        }
        if !(self.importance.threshold > 0.0 && self.importance.threshold < 1.0) {
            return Err(CliError::usage("importance.threshold must lie in (0, 1)"));
        }
        Ok(())
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            target: self.target_column.clone().unwrap_or_default(),
            timestamp_columns: self.timestamp_columns.clone(),
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let l = &self.lstm;
        let f = &self.forest;
        PipelineConfig {
            train: TrainConfig {
                seq_len: l.seq_len,
                epochs: l.epochs,
                hidden_dim: l.hidden_dim,
                learning_rate: l.learning_rate,
                seed: 0,
                shuffle: l.shuffle,
                clip_norm: l.clip_norm,
            },
            forest: ForestConfig {
                n_trees: f.n_trees,
                max_depth: f.max_depth,
                min_samples_leaf: f.min_samples_leaf,
                features_per_split: f.features_per_split,
                bootstrap: f.bootstrap,
                seed: 0,
            },
            importance_threshold: self.importance.threshold,
            train_fraction: self.train_fraction,
            window_mode: self.window.mode,
        }
    }

    pub fn window_spec(&self) -> Result<WindowSpec, CliError> {
        let n = self
            .window
            .n
            .ok_or_else(|| CliError::usage("a window size is required (--n or window.n)"))?;
        Ok(WindowSpec {
            n,
            mode: self.window.mode,
        })
    }
}

/// Sets a dotted key such as `lstm.epochs=5`. The value is parsed as a TOML
/// value when possible and taken as a string otherwise.
fn apply_override(doc: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::usage(format!("override {item:?} is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut table = doc;
    for part in parents {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::usage(format!("{part} is not a table in override {item:?}")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
