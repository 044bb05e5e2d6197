use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::rng_from;

/// One gate: an `H x (H + I)` weight matrix acting on `[h_prev, x]`, plus bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Gate {
    fn zeros(hidden: usize, input: usize) -> Self {
        Gate {
            weights: Matrix::zeros(hidden, hidden + input),
            bias: vec![0.0; hidden],
        }
    }

    /// `W z + b`, written into `out`.
    #[inline]
    pub(crate) fn affine(&self, z: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = self.weights.row(j);
            let mut acc = self.bias[j];
            for (w, v) in row.iter().zip(z) {
                acc += w * v;
            }
            *o = acc;
        }
    }
}

/// Single-layer LSTM with a one-neuron linear readout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub forget: Gate,
    pub input: Gate,
    pub candidate: Gate,
    pub output: Gate,
    pub readout_weights: Vec<f64>,
    pub readout_bias: f64,
}

impl LstmModel {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        LstmModel {
            input_dim,
            hidden_dim,
            forget: Gate::zeros(hidden_dim, input_dim),
            input: Gate::zeros(hidden_dim, input_dim),
            candidate: Gate::zeros(hidden_dim, input_dim),
            output: Gate::zeros(hidden_dim, input_dim),
            readout_weights: vec![0.0; hidden_dim],
            readout_bias: 0.0,
        }
    }

    /// Glorot-uniform weights, forget bias 1, other biases 0.
    pub fn init(input_dim: usize, hidden_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::InvalidArgument(
                "input and hidden dimensions must be positive".into(),
            ));
        }
        let mut rng = rng_from(seed);
        let mut model = LstmModel::zeros(input_dim, hidden_dim);
        let gate_bound = gate_init_bound(input_dim, hidden_dim);
        for gate in model.gates_mut() {
            for w in gate.weights.as_mut_slice() {
                *w = rng.random_range(-gate_bound..gate_bound);
            }
        }
        model.forget.bias.fill(1.0);
        let readout_bound = readout_init_bound(hidden_dim);
        for w in &mut model.readout_weights {
            *w = rng.random_range(-readout_bound..readout_bound);
        }
        Ok(model)
    }

    pub fn gates(&self) -> [&Gate; 4] {
        [&self.forget, &self.input, &self.candidate, &self.output]
    }

    pub fn gates_mut(&mut self) -> [&mut Gate; 4] {
        [
            &mut self.forget,
            &mut self.input,
            &mut self.candidate,
            &mut self.output,
        ]
    }

    /// Every parameter block, in a fixed order shared by all models of the same shape.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(10);
        for gate in self.gates() {
            out.push(gate.weights.as_slice());
            out.push(&gate.bias);
        }
        out.push(&self.readout_weights);
        out.push(std::slice::from_ref(&self.readout_bias));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(10);
        let LstmModel {
            forget,
            input,
            candidate,
            output,
            readout_weights,
            readout_bias,
            ..
        } = self;
        for gate in [forget, input, candidate, output] {
            out.push(gate.weights.as_mut_slice());
            out.push(&mut gate.bias);
        }
        out.push(readout_weights);
        out.push(std::slice::from_mut(readout_bias));
        out
    }

    pub fn n_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    pub fn same_shape(&self, other: &LstmModel) -> bool {
        self.input_dim == other.input_dim && self.hidden_dim == other.hidden_dim
    }
}

pub fn gate_init_bound(input_dim: usize, hidden_dim: usize) -> f64 {
    (6.0 / ((input_dim + hidden_dim) + hidden_dim) as f64).sqrt()
}

pub fn readout_init_bound(hidden_dim: usize) -> f64 {
    (6.0 / (hidden_dim + 1) as f64).sqrt()
}
