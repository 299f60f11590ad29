//! Bias-corrected Adam as a pure state transition.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { lr: 1e-2, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam parameters {self:?}")))
        }
    }
}

/// Parameters plus first/second moment estimates after `t` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub params: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: Vec<f64>) -> Self {
        let n = params.len();
        Self { params, m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

pub fn adam_step(state: &AdamState, grad: &[f64], hp: &AdamParams) -> Result<AdamState> {
    if grad.len() != state.params.len() {
        return Err(Error::InvalidArgument(format!(
            "gradient has {} entries, state has {}",
            grad.len(),
            state.params.len()
        )));
    }
    let t = state.t + 1;
    let bc1 = 1.0 - hp.beta1.powi(t as i32);
    let bc2 = 1.0 - hp.beta2.powi(t as i32);
    let mut next = AdamState { params: state.params.clone(), m: state.m.clone(), v: state.v.clone(), t };
    for i in 0..grad.len() {
        let g = grad[i];
        next.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * g;
        next.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * g * g;
        let m_hat = next.m[i] / bc1;
        let v_hat = next.v[i] / bc2;
        next.params[i] -= hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
    }
    Ok(next)
}
