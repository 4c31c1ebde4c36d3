use alloc::vec::Vec;

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences, returning the worst
/// `|analytic - numeric| / max(1, |analytic|)` over every coordinate of
/// every parameter tensor.
///
/// `f` receives a fresh graph and one parameter node per tensor in `params`
/// and must return a scalar node.
pub fn gradient_check<F>(mut f: F, params: &[Tensor], h: f64) -> Result<f64>
where
    F: FnMut(&mut Graph, &[Var]) -> Result<Var>,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::invalid("finite-difference step must lie in [1e-7, 1e-3]"));
    }
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| g.param(p.clone())).collect();
    let loss = f(&mut g, &vars)?;
    if !g.value(loss).all_finite() {
        return Err(Error::NonFiniteValue);
    }
    let grads = g.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|v| grads.get(*v)).collect();

    let mut eval = |ps: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ps.iter().map(|p| g.param(p.clone())).collect();
        let out = f(&mut g, &vars)?;
        let v = g.value(out).item();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteValue)
        }
    };

    let mut work: Vec<Tensor> = params.to_vec();
    let mut worst = 0.0f64;
    for (pi, a) in analytic.iter().enumerate() {
        for j in 0..a.len() {
            let orig = work[pi].data()[j];
            work[pi].data_mut()[j] = orig + h;
            let up = eval(&work)?;
            work[pi].data_mut()[j] = orig - h;
            let down = eval(&work)?;
            work[pi].data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let an = a.data()[j];
            let rel = (an - numeric).abs() / an.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// Single-tensor form of [`gradient_check`].
pub fn finite_difference_check<F>(mut f: F, theta: &Tensor, h: f64) -> Result<f64>
where
    F: FnMut(&mut Graph, Var) -> Result<Var>,
{
    gradient_check(|g, vars| f(g, vars[0]), core::slice::from_ref(theta), h)
}
