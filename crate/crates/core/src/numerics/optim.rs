use alloc::vec::Vec;

use super::tensor::Tensor;
use crate::math;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adaptive moment estimation over a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, params: &[Tensor]) -> Self {
        let m = params.iter().map(|p| alloc::vec![0.0; p.len()]).collect();
        let v = params.iter().map(|p| alloc::vec![0.0; p.len()]).collect();
        Adam { cfg, step: 0, m, v }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) {
        self.step += 1;
        let c = self.cfg;
        let bc1 = 1.0 - math::powf(c.beta1, self.step as f64);
        let bc2 = 1.0 - math::powf(c.beta2, self.step as f64);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (w, gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * gj;
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * gj * gj;
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                *w -= c.learning_rate * mh / (math::sqrt(vh) + c.epsilon);
            }
        }
    }
}
