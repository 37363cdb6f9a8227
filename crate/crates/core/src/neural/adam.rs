use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

use super::params::{ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment buffers laid out like the store, and one step counter per tensor
/// so that updating a subset leaves the others' bias correction untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub steps: Vec<u64>,
}

impl AdamState {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        Self {
            config,
            m: alloc::vec![0.0; store.len()],
            v: alloc::vec![0.0; store.len()],
            steps: alloc::vec![0; store.ids().len()],
        }
    }

    /// Bias-corrected Adam update of every tensor.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        let ids: Vec<ParamId> = store.ids().to_vec();
        self.step_subset(store, &ids)
    }

    /// Updates only `ids`; values and moments of every other tensor stay
    /// bit-identical. Nothing is modified if any selected gradient is
    /// non-finite.
    pub fn step_subset(&mut self, store: &mut ParamStore, ids: &[ParamId]) -> Result<()> {
        for &id in ids {
            if store.grad(id).iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient(String::from(store.name(id))));
            }
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let (values, grads) = store.update_mut();
        for &id in ids {
            self.steps[id.index] += 1;
            let t = self.steps[id.index] as i32;
            let c1 = 1.0 - libm::pow(beta1, t as f64);
            let c2 = 1.0 - libm::pow(beta2, t as f64);
            for i in id.range() {
                let g = grads[i];
                self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                let m_hat = self.m[i] / c1;
                let v_hat = self.v[i] / c2;
                values[i] -= lr * m_hat / (math::sqrt(v_hat) + eps);
            }
        }
        Ok(())
    }
}
