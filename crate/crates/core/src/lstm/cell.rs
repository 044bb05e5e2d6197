//! Forward recurrence and backpropagation through time.
//!
//! Per step, with `z = [h_prev, x]`:
//!
//! ```text
//! f = σ(W_f z + b_f)    i = σ(W_i z + b_i)    o = σ(W_o z + b_o)
//! c̃ = tanh(W_c z + b_c)
//! C = f ⊙ C_prev + i ⊙ c̃
//! h = o ⊙ tanh(C)
//! ŷ = w_r · h + b_r
//! ```

use serde::{Deserialize, Serialize};

use super::model::LstmModel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub cell: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl CellState {
    pub fn zeros(hidden_dim: usize) -> Self {
        CellState {
            cell: vec![0.0; hidden_dim],
            hidden: vec![0.0; hidden_dim],
        }
    }
}

/// Activations of one step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    /// `[h_prev, x]`
    pub concat: Vec<f64>,
    pub forget: Vec<f64>,
    pub input: Vec<f64>,
    pub candidate: Vec<f64>,
    pub output: Vec<f64>,
    pub prev_cell: Vec<f64>,
    pub cell: Vec<f64>,
    pub cell_tanh: Vec<f64>,
    pub hidden: Vec<f64>,
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// One recurrence step.
pub fn cell_forward(model: &LstmModel, x: &[f64], prev: &CellState) -> Result<(CellState, StepCache)> {
    let h = model.hidden_dim;
    if x.len() != model.input_dim || prev.cell.len() != h || prev.hidden.len() != h {
        return Err(Error::Shape(format!(
            "cell expects input {} and state {h}, got input {} and state {}/{}",
            model.input_dim,
            x.len(),
            prev.cell.len(),
            prev.hidden.len()
        )));
    }
    Ok(step(model, x, prev))
}

pub(crate) fn step(model: &LstmModel, x: &[f64], prev: &CellState) -> (CellState, StepCache) {
    let h = model.hidden_dim;
    let mut concat = Vec::with_capacity(h + x.len());
    concat.extend_from_slice(&prev.hidden);
    concat.extend_from_slice(x);

    let mut forget = vec![0.0; h];
    let mut input = vec![0.0; h];
    let mut candidate = vec![0.0; h];
    let mut output = vec![0.0; h];
    model.forget.affine(&concat, &mut forget);
    model.input.affine(&concat, &mut input);
    model.candidate.affine(&concat, &mut candidate);
    model.output.affine(&concat, &mut output);
    forget.iter_mut().for_each(|v| *v = sigmoid(*v));
    input.iter_mut().for_each(|v| *v = sigmoid(*v));
    output.iter_mut().for_each(|v| *v = sigmoid(*v));
    candidate.iter_mut().for_each(|v| *v = v.tanh());

    let cell: Vec<f64> = (0..h)
        .map(|j| prev.cell[j] * forget[j] + input[j] * candidate[j])
        .collect();
    let cell_tanh: Vec<f64> = cell.iter().map(|c| c.tanh()).collect();
    let hidden: Vec<f64> = (0..h).map(|j| output[j] * cell_tanh[j]).collect();

    let state = CellState {
        cell: cell.clone(),
        hidden: hidden.clone(),
    };
    let cache = StepCache {
        concat,
        forget,
        input,
        candidate,
        output,
        prev_cell: prev.cell.clone(),
        cell,
        cell_tanh,
        hidden,
    };
    (state, cache)
}

pub fn readout(model: &LstmModel, hidden: &[f64]) -> f64 {
    model.readout_bias
        + model
            .readout_weights
            .iter()
            .zip(hidden)
            .map(|(w, h)| w * h)
            .sum::<f64>()
}

#[derive(Debug, Clone)]
pub struct SequenceOutput {
    pub predictions: Vec<f64>,
    pub caches: Vec<StepCache>,
    pub final_state: CellState,
}

/// Runs the recurrence over the rows of `window`, starting from `init`.
pub fn forward_sequence(model: &LstmModel, window: &Matrix, init: &CellState) -> Result<SequenceOutput> {
    if window.cols() != model.input_dim {
        return Err(Error::Shape(format!(
            "sequence has {} features, model expects {}",
            window.cols(),
            model.input_dim
        )));
    }
    let mut state = init.clone();
    let mut predictions = Vec::with_capacity(window.rows());
    let mut caches = Vec::with_capacity(window.rows());
    for x in window.row_iter() {
        let (next, cache) = cell_forward(model, x, &state)?;
        predictions.push(readout(model, &next.hidden));
        caches.push(cache);
        state = next;
    }
    Ok(SequenceOutput {
        predictions,
        caches,
        final_state: state,
    })
}

/// Mean squared error over the sequence.
pub fn sequence_loss(predictions: &[f64], targets: &[f64]) -> f64 {
    let n = predictions.len() as f64;
    predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / n
}

/// Gradients of the mean squared error with respect to every parameter, in a
/// model-shaped container.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub LstmModel);

impl Gradients {
    pub fn zeros_like(model: &LstmModel) -> Self {
        Gradients(LstmModel::zeros(model.input_dim, model.hidden_dim))
    }

    pub fn norm(&self) -> f64 {
        self.0
            .params()
            .iter()
            .flat_map(|p| p.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for block in self.0.params_mut() {
            block.iter_mut().for_each(|g| *g *= factor);
        }
    }
}

/// Backpropagation through the whole cached sequence.
///
/// The initial state is treated as a constant. Returns the gradients and the loss.
pub fn backward(
    model: &LstmModel,
    output: &SequenceOutput,
    targets: &[f64],
) -> Result<(Gradients, f64)> {
    let steps = output.caches.len();
    if targets.len() != steps || output.predictions.len() != steps {
        return Err(Error::Shape(format!(
            "{} targets for a {steps}-step sequence",
            targets.len()
        )));
    }
    if steps == 0 {
        return Ok((Gradients::zeros_like(model), 0.0));
    }
    let h = model.hidden_dim;
    let loss = sequence_loss(&output.predictions, targets);
    let mut grads = Gradients::zeros_like(model);

    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dh = vec![0.0; h];
    let mut da = [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]];
    let mut dz = vec![0.0; model.hidden_dim + model.input_dim];
    let scale = 2.0 / steps as f64;

    for t in (0..steps).rev() {
        let cache = &output.caches[t];
        let dy = scale * (output.predictions[t] - targets[t]);

        grads.0.readout_bias += dy;
        for j in 0..h {
            grads.0.readout_weights[j] += dy * cache.hidden[j];
            dh[j] = model.readout_weights[j] * dy + dh_next[j];
        }

        for j in 0..h {
            let o = cache.output[j];
            let tc = cache.cell_tanh[j];
            let dc = dh[j] * o * (1.0 - tc * tc) + dc_next[j];
            let f = cache.forget[j];
            let i = cache.input[j];
            let g = cache.candidate[j];
            // pre-activation gradients, gate order: forget, input, candidate, output
            da[0][j] = dc * cache.prev_cell[j] * f * (1.0 - f);
            da[1][j] = dc * g * i * (1.0 - i);
            da[2][j] = dc * i * (1.0 - g * g);
            da[3][j] = dh[j] * tc * o * (1.0 - o);
            dc_next[j] = dc * f;
        }

        dz.fill(0.0);
        let grad_gates = grads.0.gates_mut();
        for (k, grad_gate) in grad_gates.into_iter().enumerate() {
            let gate = model.gates()[k];
            for j in 0..h {
                let a = da[k][j];
                if a == 0.0 {
                    continue;
                }
                grad_gate.bias[j] += a;
                let grad_row = grad_gate.weights.row_mut(j);
                for (gw, z) in grad_row.iter_mut().zip(&cache.concat) {
                    *gw += a * z;
                }
                for (d, w) in dz.iter_mut().zip(gate.weights.row(j)) {
                    *d += a * w;
                }
            }
        }
        dh_next.copy_from_slice(&dz[..h]);
    }
    Ok((grads, loss))
}
