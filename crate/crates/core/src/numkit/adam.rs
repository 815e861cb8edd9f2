use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        AdamHyper { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Optimizer state: first and second moment accumulators over a flat
/// parameter vector, plus the step counter for bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub hyper: AdamHyper,
}

impl AdamState {
    pub fn new(param_count: usize, hyper: AdamHyper) -> Self {
        AdamState { m: vec![0.0; param_count], v: vec![0.0; param_count], step: 0, hyper }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update. Pure: returns the new parameters and the
/// advanced optimizer state.
pub fn adam_step(
    params: &[f64],
    grads: &[f64],
    state: &AdamState,
) -> Result<(Vec<f64>, AdamState)> {
    if params.len() != state.m.len() || grads.len() != state.m.len() {
        return Err(Error::Dimension(format!(
            "adam: state tracks {} parameters, got params[{}] grads[{}]",
            state.m.len(),
            params.len(),
            grads.len()
        )));
    }
    let h = state.hyper;
    let t = state.step + 1;
    let bc1 = 1.0 - h.beta1.powi(t as i32);
    let bc2 = 1.0 - h.beta2.powi(t as i32);

    let mut next = AdamState {
        m: vec![0.0; params.len()],
        v: vec![0.0; params.len()],
        step: t,
        hyper: h,
    };
    let mut out = vec![0.0; params.len()];
    for k in 0..params.len() {
        let g = grads[k];
        let m = h.beta1 * state.m[k] + (1.0 - h.beta1) * g;
        let v = h.beta2 * state.v[k] + (1.0 - h.beta2) * g * g;
        next.m[k] = m;
        next.v[k] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        out[k] = params[k] - h.lr * m_hat / (v_hat.sqrt() + h.eps);
    }
    Ok((out, next))
}
