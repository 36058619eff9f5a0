use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::tensor::{ParamId, ParamStore};
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled weight decay, applied as `w -= lr * wd * w`.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 5e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: 1e-6 }
    }
}

/// First and second moment estimates of one tensor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

/// One Adam update of `param` in place. `step` is the 1-based step count
/// used for bias correction.
pub fn adam_update(param: &mut [f64], grad: &[f64], moments: &mut Moments, step: u64, cfg: &AdamConfig) {
    if moments.m.len() != param.len() {
        moments.m = vec![0.0; param.len()];
        moments.v = vec![0.0; param.len()];
    }
    let bc1 = 1.0 - libm::pow(cfg.beta1, step as f64);
    let bc2 = 1.0 - libm::pow(cfg.beta2, step as f64);
    for i in 0..param.len() {
        let g = grad[i];
        moments.m[i] = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * g;
        moments.v[i] = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = moments.m[i] / bc1;
        let v_hat = moments.v[i] / bc2;
        let w = param[i];
        param[i] = w - cfg.learning_rate * (m_hat / (libm::sqrt(v_hat) + cfg.epsilon)) - cfg.learning_rate * cfg.weight_decay * w;
    }
}

/// Adam with decoupled weight decay over a [`ParamStore`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    state: BTreeMap<usize, Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam { config, step: 0, state: BTreeMap::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Updates `params` from their accumulated gradients, then clears the
    /// gradients. Parameters without a gradient are treated as having a zero
    /// gradient. A non-finite gradient aborts the step before anything changes.
    pub fn step(&mut self, store: &mut ParamStore, params: &[ParamId]) -> Result<(), NnError> {
        for &id in params {
            if let Some(g) = &store.get(id).grad {
                if let Some(pos) = g.iter().position(|v| !v.is_finite()) {
                    return Err(NnError::Numerical { param: id.0, index: pos });
                }
            }
        }
        self.step += 1;
        for &id in params {
            let tensor = store.get_mut(id);
            let grad = tensor.grad.take().unwrap_or_else(|| vec![0.0; tensor.data.len()]);
            let moments = self.state.entry(id.0).or_default();
            adam_update(&mut tensor.data, &grad, moments, self.step, &self.config);
        }
        store.zero_grad();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    #[test]
    fn zero_gradient_and_decay_leave_weights() {
        let cfg = AdamConfig { weight_decay: 0.0, ..AdamConfig::default() };
        let mut w = [0.3, -1.2];
        let mut mom = Moments::default();
        adam_update(&mut w, &[0.0, 0.0], &mut mom, 1, &cfg);
        assert_eq!(w, [0.3, -1.2]);
    }

    #[test]
    fn first_step_closed_form() {
        let cfg = AdamConfig { learning_rate: 1e-3, weight_decay: 0.0, ..AdamConfig::default() };
        let mut w = [0.5];
        let mut mom = Moments::default();
        adam_update(&mut w, &[1.0], &mut mom, 1, &cfg);
        // m = 0.1, v = 0.001, m_hat = v_hat = 1
        let expected = 0.5 - 1e-3 * (1.0 / (1.0 + 1e-8));
        assert!((w[0] - expected).abs() < 1e-15);
        assert!((mom.m[0] - 0.1).abs() < 1e-15);
        assert!((mom.v[0] - 0.001).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_alone_shrinks_proportionally() {
        let cfg = AdamConfig { learning_rate: 0.1, weight_decay: 0.01, ..AdamConfig::default() };
        let mut w = [2.0, -4.0];
        let mut mom = Moments::default();
        adam_update(&mut w, &[0.0, 0.0], &mut mom, 1, &cfg);
        assert!((w[0] - (2.0 - 0.1 * 0.01 * 2.0)).abs() < 1e-15);
        assert!((w[1] - (-4.0 + 0.1 * 0.01 * 4.0)).abs() < 1e-15);
    }

    #[test]
    fn nan_gradient_aborts_without_changes() {
        let mut store = ParamStore::new();
        let a = store.add("a", Tensor::new(vec![2], vec![1.0, 2.0]));
        let b = store.add("b", Tensor::new(vec![1], vec![3.0]));
        store.get_mut(a).grad = Some(vec![0.5, 0.5]);
        store.get_mut(b).grad = Some(vec![f64::NAN]);
        let mut adam = Adam::new(AdamConfig::default());
        let err = adam.step(&mut store, &[a, b]).unwrap_err();
        assert!(matches!(err, NnError::Numerical { param: 1, index: 0 }));
        assert_eq!(store.get(a).data, vec![1.0, 2.0]);
        assert_eq!(adam.steps_taken(), 0);
    }

    #[test]
    fn step_clears_gradients() {
        let mut store = ParamStore::new();
        let a = store.add("a", Tensor::new(vec![1], vec![1.0]));
        store.get_mut(a).grad = Some(vec![1.0]);
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut store, &[a]).unwrap();
        assert!(store.get(a).grad.is_none());
        assert!(store.get(a).data[0] < 1.0);
    }
}
