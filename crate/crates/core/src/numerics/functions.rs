use alloc::vec::Vec;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::math;

/// Clamp applied to probabilities before any logarithm.
pub const LOG_EPS: f64 = 1e-12;

/// Numerically stabilised softmax of a logit vector.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::EmptyLogits);
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|v| math::exp(v - max)).collect();
    let z: f64 = out.iter().sum();
    for v in &mut out {
        *v /= z;
    }
    Ok(out)
}

/// `-[w_pos * y * ln p + w_neg * (1 - y) * ln(1 - p)]` with `p` clamped.
pub fn weighted_binary_cross_entropy(p: f64, y: f64, w_pos: f64, w_neg: f64) -> Result<f64> {
    if w_pos <= 0.0 || w_neg <= 0.0 {
        return Err(Error::NonPositiveClassWeight);
    }
    let p = binary_entropy_clamp(p);
    let loss = -(w_pos * y * math::ln(p) + w_neg * (1.0 - y) * math::ln(1.0 - p));
    Ok(loss.max(0.0))
}

pub fn binary_entropy_clamp(p: f64) -> f64 {
    p.clamp(LOG_EPS, 1.0 - LOG_EPS)
}

impl Tensor {
    /// Softmax of a rank-1 tensor.
    pub fn softmax(&self) -> Result<Tensor> {
        Ok(Tensor::vector(softmax(self.data())?))
    }
}
