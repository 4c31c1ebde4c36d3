use alloc::vec::Vec;

use rand::Rng as _;

use super::tensor::Tensor;
use crate::math;
use crate::rng::Rng;

/// Half-width `sqrt(6 / (fan_in + fan_out))` of the Glorot uniform range.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    math::sqrt(6.0 / (fan_in + fan_out) as f64)
}

/// `[fan_in, fan_out]` matrix drawn uniformly from the Glorot range.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut Rng) -> Tensor {
    let s = glorot_limit(fan_in, fan_out);
    let data: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.random_range(-s..=s)).collect();
    Tensor::from_parts(alloc::vec![fan_in, fan_out], data)
}
