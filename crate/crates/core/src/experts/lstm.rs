use alloc::vec::Vec;

use super::batch::SequenceBatch;
use super::{named, ExpertKind, SequenceExpert};
use crate::error::{Error, Result};
use crate::numerics::{glorot_uniform, Graph, Tensor, Var};
use crate::rng::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LstmConfig {
    pub input_width: usize,
    pub hidden: usize,
}

/// Single-layer LSTM over a window, read out from the final hidden state.
///
/// Parameters, in order: `w_input [d, 4H]`, `u_recurrent [H, 4H]`,
/// `b_gates [4H]`, `w_out [H, 1]`, `b_out [1]`. Gate blocks along the `4H`
/// axis are input, forget, output, candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmExpert {
    pub config: LstmConfig,
    params: Vec<Tensor>,
}

pub const LSTM_PARAM_NAMES: [&str; 5] = ["w_input", "u_recurrent", "b_gates", "w_out", "b_out"];

impl LstmExpert {
    pub fn new(config: LstmConfig, seed: u64) -> Result<Self> {
        let (d, h) = (config.input_width, config.hidden);
        if d == 0 || h == 0 {
            return Err(Error::invalid("lstm widths must be positive"));
        }
        let mut r = rng(seed);
        let mut b_gates = alloc::vec![0.0; 4 * h];
        for v in &mut b_gates[h..2 * h] {
            *v = 1.0;
        }
        let params = alloc::vec![
            glorot_uniform(d, 4 * h, &mut r),
            glorot_uniform(h, 4 * h, &mut r),
            Tensor::vector(b_gates),
            glorot_uniform(h, 1, &mut r),
            Tensor::zeros(&[1]),
        ];
        Ok(LstmExpert { config, params })
    }

    /// Build from explicit tensors (shapes are checked).
    pub fn from_params(config: LstmConfig, params: Vec<Tensor>) -> Result<Self> {
        let e = LstmExpert::new(config, 0)?;
        super::check_shapes(&e.params, &params)?;
        Ok(LstmExpert { config, params })
    }
}

impl SequenceExpert for LstmExpert {
    fn kind(&self) -> ExpertKind {
        ExpertKind::Lstm
    }

    fn input_width(&self) -> usize {
        self.config.input_width
    }

    fn params(&self) -> &[Tensor] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Vec<Tensor> {
        &mut self.params
    }

    fn named_params(&self) -> Vec<(&'static str, &Tensor)> {
        named(&LSTM_PARAM_NAMES, &self.params)
    }

    fn forward_graph(&self, g: &mut Graph, p: &[Var], batch: &SequenceBatch) -> Result<Var> {
        if batch.width != self.config.input_width {
            return Err(Error::WidthMismatch { expected: self.config.input_width, got: batch.width });
        }
        let (b, steps, d, h) = (batch.batch, batch.steps, batch.width, self.config.hidden);
        let x = g.constant(Tensor::new(alloc::vec![steps, b, d], batch.time_major())?);
        let xw = g.matmul(x, p[0]);
        let xw = g.add_tiled(xw, p[2]);

        let mut hidden = g.constant(Tensor::zeros(&[b, h]));
        let mut cell = g.constant(Tensor::zeros(&[b, h]));
        for t in 0..steps {
            let live: Vec<bool> = (0..b).map(|i| batch.mask[i * steps + t]).collect();
            if !live.iter().any(|&m| m) {
                continue;
            }
            let xt = g.slice_rows(xw, t, 1);
            let xt = g.reshape(xt, &[b, 4 * h]);
            let hu = g.matmul(hidden, p[1]);
            let z = g.add(xt, hu);
            let zi = g.slice_cols(z, 0, h);
            let zf = g.slice_cols(z, h, h);
            let zo = g.slice_cols(z, 2 * h, h);
            let zc = g.slice_cols(z, 3 * h, h);
            let i_gate = g.sigmoid(zi);
            let f_gate = g.sigmoid(zf);
            let o_gate = g.sigmoid(zo);
            let cand = g.tanh(zc);
            let keep = g.mul(f_gate, cell);
            let write = g.mul(i_gate, cand);
            let c_new = g.add(keep, write);
            let c_act = g.tanh(c_new);
            let h_new = g.mul(o_gate, c_act);
            if live.iter().all(|&m| m) {
                hidden = h_new;
                cell = c_new;
            } else {
                let m: Vec<f64> = live.iter().flat_map(|&l| core::iter::repeat_n(if l { 1.0 } else { 0.0 }, h)).collect();
                let inv: Vec<f64> = m.iter().map(|v| 1.0 - v).collect();
                let m = g.constant(Tensor::new(alloc::vec![b, h], m)?);
                let inv = g.constant(Tensor::new(alloc::vec![b, h], inv)?);
                hidden = blend(g, m, inv, h_new, hidden);
                cell = blend(g, m, inv, c_new, cell);
            }
        }
        let logit = g.matmul(hidden, p[3]);
        let logit = g.add_tiled(logit, p[4]);
        Ok(g.sigmoid(logit))
    }
}

fn blend(g: &mut Graph, m: Var, inv: Var, new: Var, old: Var) -> Var {
    let a = g.mul(m, new);
    let b = g.mul(inv, old);
    g.add(a, b)
}
