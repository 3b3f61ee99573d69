use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators, one slot per parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One bias-corrected adaptive-moment update of `params` in place.
pub fn adam_step(
    params: &mut [f64],
    state: &mut OptimizerState,
    grads: &[f64],
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::Dimension {
            expected: params.len(),
            actual: grads.len().min(state.m.len()),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![0.3, -1.2, 4.0];
        let before = p.clone();
        let mut s = OptimizerState::new(3);
        for _ in 0..5 {
            adam_step(&mut p, &mut s, &[0.0; 3], &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(s.step_count(), 5);
    }

    #[test]
    fn first_unit_step_moves_by_learning_rate() {
        let mut p = vec![1.0, -2.0];
        let mut s = OptimizerState::new(2);
        let cfg = AdamConfig::default();
        adam_step(&mut p, &mut s, &[1.0, 1.0], &cfg).unwrap();
        // m_hat = v_hat = 1, so the step is lr / (1 + eps)
        let step = 1e-3 / (1.0 + 1e-8);
        assert!((p[0] - (1.0 - step)).abs() < 1e-15);
        assert!((p[1] - (-2.0 - step)).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![1.0];
        let mut s = OptimizerState::new(2);
        assert!(adam_step(&mut p, &mut s, &[1.0], &AdamConfig::default()).is_err());
    }
}
