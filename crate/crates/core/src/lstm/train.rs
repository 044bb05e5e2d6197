use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::cell::{backward, forward_sequence, CellState};
use super::model::LstmModel;
use crate::dataset::{holdout_split, ColumnScale, SplitSpec};
use crate::error::{Error, Result};
use crate::evalkit::rmse;
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from, stream};
use crate::windowing::SupervisedSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Rows per training sequence; the recurrent state is reset between sequences.
    pub seq_len: usize,
    pub epochs: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Visit the sequences of an epoch in random order instead of chronologically.
    pub shuffle: bool,
    /// Rescale the gradient to at most this L2 norm before each update.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seq_len: 500,
            epochs: 50,
            hidden_dim: 100,
            learning_rate: 1e-3,
            seed: 0,
            shuffle: false,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.seq_len == 0 || self.epochs == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidArgument(
                "seq_len, epochs and hidden_dim must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            ..AdamConfig::default()
        }
    }
}

/// A fitted network together with the scaling it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: LstmModel,
    /// Scaling of each feature position.
    pub input_scales: Vec<ColumnScale>,
    pub target_scale: ColumnScale,
    /// Running training RMSE per epoch, original units.
    pub train_loss_curve: Vec<f64>,
    /// Held-out RMSE after each epoch, original units.
    pub test_loss_curve: Vec<f64>,
    pub test_rmse: f64,
    pub config: TrainConfig,
}

impl TrainedModel {
    /// De-normalized predictions, one per row of `set`.
    pub fn predict(&self, set: &SupervisedSet) -> Result<Vec<f64>> {
        predict(self, set)
    }
}

/// Per-column min-max statistics over the training rows, expanded to one scale
/// per feature position.
fn fit_scales(train: &SupervisedSet) -> (Vec<ColumnScale>, ColumnScale) {
    let columns = train.column_names.len();
    let target_column = train.target_column();
    let column_scales: Vec<ColumnScale> = (0..columns)
        .map(|c| {
            let positions: Vec<usize> = train
                .layout
                .iter()
                .enumerate()
                .filter(|(_, slot)| slot.column == c)
                .map(|(k, _)| k)
                .collect();
            let from_x = train
                .x
                .row_iter()
                .flat_map(|row| positions.iter().map(move |&k| row[k]));
            if c == target_column {
                ColumnScale::fit(from_x.chain(train.y.iter().copied()))
            } else {
                ColumnScale::fit(from_x)
            }
        })
        .collect();
    let inputs = train
        .layout
        .iter()
        .map(|slot| column_scales[slot.column])
        .collect();
    (inputs, column_scales[target_column])
}

fn scale_inputs(x: &Matrix, scales: &[ColumnScale]) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        for (v, s) in out.row_mut(r).iter_mut().zip(scales) {
            *v = s.apply(*v);
        }
    }
    out
}

/// Forward-only pass in normalized units; the state resets every `seq_len` rows.
fn run_normalized(model: &LstmModel, x: &Matrix, seq_len: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(x.rows());
    let mut start = 0;
    while start < x.rows() {
        let end = (start + seq_len).min(x.rows());
        let seq = forward_sequence(model, &x.row_range(start, end), &CellState::zeros(model.hidden_dim))?;
        out.extend(seq.predictions);
        start = end;
    }
    Ok(out)
}

pub fn predict(trained: &TrainedModel, set: &SupervisedSet) -> Result<Vec<f64>> {
    if set.n_features() != trained.model.input_dim {
        return Err(Error::Shape(format!(
            "model expects {} features, set has {}",
            trained.model.input_dim,
            set.n_features()
        )));
    }
    let x = scale_inputs(&set.x, &trained.input_scales);
    let normalized = run_normalized(&trained.model, &x, trained.config.seq_len)?;
    Ok(normalized
        .into_iter()
        .map(|p| trained.target_scale.invert(p))
        .collect())
}

struct Sequence {
    inputs: Matrix,
    targets: Vec<f64>,
}

/// Trains on `train` and tracks the held-out RMSE on `test` after every epoch.
pub fn train(train: &SupervisedSet, test: &SupervisedSet, config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidData("training and test sets must be non-empty".into()));
    }
    if train.n_features() != test.n_features() {
        return Err(Error::Shape("train and test sets have different widths".into()));
    }
    let input_dim = train.n_features();
    let (input_scales, target_scale) = fit_scales(train);

    let x = scale_inputs(&train.x, &input_scales);
    let y: Vec<f64> = train.y.iter().map(|&v| target_scale.apply(v)).collect();
    let mut sequences = Vec::new();
    let mut start = 0;
    while start < x.rows() {
        let end = (start + config.seq_len).min(x.rows());
        sequences.push(Sequence {
            inputs: x.row_range(start, end),
            targets: y[start..end].to_vec(),
        });
        start = end;
    }

    let mut model = LstmModel::init(input_dim, config.hidden_dim, derive_seed(config.seed, stream::INIT))?;
    let mut adam = AdamState::new(&model, config.adam());
    let mut shuffle_rng = rng_from(derive_seed(config.seed, stream::SHUFFLE));
    let mut order: Vec<usize> = (0..sequences.len()).collect();
    let zero = CellState::zeros(config.hidden_dim);

    let test_x = scale_inputs(&test.x, &input_scales);
    let mut train_loss_curve = Vec::with_capacity(config.epochs);
    let mut test_loss_curve = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut sse = 0.0;
        for &k in &order {
            let seq = &sequences[k];
            let out = forward_sequence(&model, &seq.inputs, &zero)?;
            let (mut grads, loss) = backward(&model, &out, &seq.targets)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            sse += loss * seq.targets.len() as f64;
            if let Some(max_norm) = config.clip_norm {
                let norm = grads.norm();
                if norm > max_norm {
                    grads.scale(max_norm / norm);
                }
            }
            adam_step(&mut model, &grads, &mut adam)?;
        }
        if !model.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        train_loss_curve.push((sse / y.len() as f64).sqrt() * target_scale.range());

        let test_pred: Vec<f64> = run_normalized(&model, &test_x, config.seq_len)?
            .into_iter()
            .map(|p| target_scale.invert(p))
            .collect();
        let test_rmse = rmse(&test_pred, &test.y)?;
        if !test_rmse.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        test_loss_curve.push(test_rmse);
    }

    let test_rmse = *test_loss_curve.last().expect("epochs >= 1");
    Ok(TrainedModel {
        model,
        input_scales,
        target_scale,
        train_loss_curve,
        test_loss_curve,
        test_rmse,
        config: config.clone(),
    })
}

/// The train and test halves of a holdout split.
#[derive(Debug, Clone)]
pub struct Holdout {
    pub train: SupervisedSet,
    pub test: SupervisedSet,
}

/// Splits `set` per `split`, then trains.
pub fn train_holdout(
    set: &SupervisedSet,
    split: &SplitSpec,
    config: &TrainConfig,
) -> Result<(TrainedModel, Holdout)> {
    let (train_set, test_set) = holdout_split(set, split)?;
    let trained = train(&train_set, &test_set, config)?;
    Ok((
        trained,
        Holdout {
            train: train_set,
            test: test_set,
        },
    ))
}
