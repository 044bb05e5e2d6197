use serde::{Deserialize, Serialize};

use super::cell::Gradients;
use super::model::LstmModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, shaped like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: LstmModel,
    pub second_moment: LstmModel,
    pub step: u64,
}

impl AdamState {
    pub fn new(model: &LstmModel, config: AdamConfig) -> Self {
        AdamState {
            config,
            first_moment: LstmModel::zeros(model.input_dim, model.hidden_dim),
            second_moment: LstmModel::zeros(model.input_dim, model.hidden_dim),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(model: &mut LstmModel, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if !model.same_shape(&grads.0) || !model.same_shape(&state.first_moment) {
        return Err(Error::Shape("gradient or optimizer state does not match the model".into()));
    }
    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let correction1 = 1.0 - beta1.powi(state.step as i32);
    let correction2 = 1.0 - beta2.powi(state.step as i32);

    let params = model.params_mut();
    let grads = grads.0.params();
    let firsts = state.first_moment.params_mut();
    let seconds = state.second_moment.params_mut();
    for (((p, g), m), v) in params.into_iter().zip(grads).zip(firsts).zip(seconds) {
        for k in 0..p.len() {
            let gk = g[k];
            m[k] = beta1 * m[k] + (1.0 - beta1) * gk;
            v[k] = beta2 * v[k] + (1.0 - beta2) * gk * gk;
            let m_hat = m[k] / correction1;
            let v_hat = v[k] / correction2;
            p[k] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}
