use serde::{Deserialize, Serialize};

use super::params::ParamVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid Adam hyperparameters {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// The gradient had a NaN/Inf entry; parameters and moments are untouched.
    SkippedNonFinite,
}

/// One bias-corrected Adam update at learning rate `lr`.
pub fn adam_step(
    params: &mut ParamVector,
    grads: &ParamVector,
    state: &mut AdamState,
    hyper: &AdamConfig,
    lr: f64,
) -> Result<StepOutcome> {
    if !params.same_layout(grads) || state.m.len() != params.len() {
        return Err(Error::InvalidArgument(
            "Adam: parameter/gradient layout mismatch".into(),
        ));
    }
    if !grads.is_finite() {
        return Ok(StepOutcome::SkippedNonFinite);
    }
    state.step += 1;
    let step = state.step as i32;
    let bc1 = 1.0 - hyper.beta1.powi(step);
    let bc2 = 1.0 - hyper.beta2.powi(step);
    for i in 0..params.values.len() {
        let g = grads.values[i];
        let m = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
        let v = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        params.values[i] -= lr * m_hat / (v_hat.sqrt() + hyper.eps);
    }
    Ok(StepOutcome::Applied)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nd::params::ParamBlock;

    fn pv(values: Vec<f64>) -> ParamVector {
        let n = values.len();
        ParamVector::from_parts(vec![ParamBlock::new("p", vec![n])], values).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = pv(vec![1.0, -2.0, 3.5]);
        let g = pv(vec![0.0; 3]);
        let mut st = AdamState::new(3);
        let hyper = AdamConfig::default();
        for _ in 0..100 {
            adam_step(&mut p, &g, &mut st, &hyper, hyper.lr).unwrap();
        }
        assert_eq!(p.values, vec![1.0, -2.0, 3.5]);
        assert_eq!(st.step, 100);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient() {
        // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
        let mut p = pv(vec![0.0, 0.0]);
        let g = pv(vec![0.3, -7.0]);
        let mut st = AdamState::new(2);
        let hyper = AdamConfig {
            eps: 0.0,
            ..AdamConfig::default()
        };
        adam_step(&mut p, &g, &mut st, &hyper, 0.01).unwrap();
        assert!((p.values[0] + 0.01).abs() < 1e-15);
        assert!((p.values[1] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_skipped() {
        let mut p = pv(vec![1.0]);
        let g = pv(vec![f64::NAN]);
        let mut st = AdamState::new(1);
        let out = adam_step(&mut p, &g, &mut st, &AdamConfig::default(), 1e-3).unwrap();
        assert_eq!(out, StepOutcome::SkippedNonFinite);
        assert_eq!(p.values, vec![1.0]);
        assert_eq!(st.step, 0);
    }

    #[test]
    fn identical_runs_identical_trajectories() {
        let run = || {
            let mut p = pv(vec![0.5, -0.5]);
            let mut st = AdamState::new(2);
            let hyper = AdamConfig::default();
            for k in 0..50 {
                let g = pv(vec![p.values[0] * 2.0 + k as f64 * 0.01, p.values[1].sin()]);
                adam_step(&mut p, &g, &mut st, &hyper, hyper.lr).unwrap();
            }
            p.values
        };
        assert_eq!(run(), run());
    }
}
