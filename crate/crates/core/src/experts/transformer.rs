use alloc::vec::Vec;

use super::batch::SequenceBatch;
use super::{named, ExpertKind, SequenceExpert};
use crate::error::{Error, Result};
use crate::math;
use crate::numerics::{glorot_uniform, Graph, Tensor, Var};
use crate::rng::rng;

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransformerConfig {
    pub input_width: usize,
    pub window: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ffn: usize,
}

pub const TRANSFORMER_PARAM_NAMES: [&str; 21] = [
    "w_in", "b_in", "positional", "w_q", "b_q", "w_k", "b_k", "w_v", "b_v", "w_o", "b_o", "ln1_gamma", "ln1_beta",
    "w_ff1", "b_ff1", "w_ff2", "b_ff2", "ln2_gamma", "ln2_beta", "w_out", "b_out",
];

mod ix {
    pub const W_IN: usize = 0;
    pub const B_IN: usize = 1;
    pub const POS: usize = 2;
    pub const W_Q: usize = 3;
    pub const B_Q: usize = 4;
    pub const W_K: usize = 5;
    pub const B_K: usize = 6;
    pub const W_V: usize = 7;
    pub const B_V: usize = 8;
    pub const W_O: usize = 9;
    pub const B_O: usize = 10;
    pub const LN1_G: usize = 11;
    pub const LN1_B: usize = 12;
    pub const W_FF1: usize = 13;
    pub const B_FF1: usize = 14;
    pub const W_FF2: usize = 15;
    pub const B_FF2: usize = 16;
    pub const LN2_G: usize = 17;
    pub const LN2_B: usize = 18;
    pub const W_OUT: usize = 19;
    pub const B_OUT: usize = 20;
}

/// One encoder block (multi-head self-attention and a feed-forward layer,
/// each with a residual connection and layer normalisation) over a
/// projected window with learned positions, mean-pooled over real steps.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformerExpert {
    pub config: TransformerConfig,
    params: Vec<Tensor>,
}

impl TransformerExpert {
    pub fn new(config: TransformerConfig, seed: u64) -> Result<Self> {
        let TransformerConfig { input_width: d, window: w, d_model: m, heads, ffn } = config;
        if d == 0 || w == 0 || m == 0 || ffn == 0 || heads == 0 {
            return Err(Error::invalid("transformer sizes must be positive"));
        }
        if m % heads != 0 {
            return Err(Error::invalid(alloc::format!("{heads} heads do not divide model width {m}")));
        }
        let mut r = rng(seed);
        let mut positional = glorot_uniform(w, m, &mut r);
        for v in positional.data_mut() {
            *v *= 0.1;
        }
        let params = alloc::vec![
            glorot_uniform(d, m, &mut r),
            Tensor::zeros(&[m]),
            positional,
            glorot_uniform(m, m, &mut r),
            Tensor::zeros(&[m]),
            glorot_uniform(m, m, &mut r),
            Tensor::zeros(&[m]),
            glorot_uniform(m, m, &mut r),
            Tensor::zeros(&[m]),
            glorot_uniform(m, m, &mut r),
            Tensor::zeros(&[m]),
            Tensor::full(&[m], 1.0),
            Tensor::zeros(&[m]),
            glorot_uniform(m, ffn, &mut r),
            Tensor::zeros(&[ffn]),
            glorot_uniform(ffn, m, &mut r),
            Tensor::zeros(&[m]),
            Tensor::full(&[m], 1.0),
            Tensor::zeros(&[m]),
            glorot_uniform(m, 1, &mut r),
            Tensor::zeros(&[1]),
        ];
        Ok(TransformerExpert { config, params })
    }

    pub fn from_params(config: TransformerConfig, params: Vec<Tensor>) -> Result<Self> {
        let e = TransformerExpert::new(config, 0)?;
        super::check_shapes(&e.params, &params)?;
        Ok(TransformerExpert { config, params })
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        let i = TRANSFORMER_PARAM_NAMES.iter().position(|n| *n == name)?;
        self.params.get_mut(i)
    }

    /// Attention weights `[batch, heads, steps, steps]` for a batch.
    pub fn attention_weights(&self, batch: &SequenceBatch) -> Result<Tensor> {
        let mut g = Graph::new();
        let p: Vec<Var> = self.params.iter().map(|t| g.constant(t.clone())).collect();
        let (_, attn) = self.encode(&mut g, &p, batch)?;
        let (b, w, h) = (batch.batch, batch.steps, self.config.heads);
        g.value(attn).clone().reshaped(alloc::vec![b, h, w, w])
    }

    fn encode(&self, g: &mut Graph, p: &[Var], batch: &SequenceBatch) -> Result<(Var, Var)> {
        let cfg = &self.config;
        if batch.width != cfg.input_width {
            return Err(Error::WidthMismatch { expected: cfg.input_width, got: batch.width });
        }
        if batch.steps != cfg.window {
            return Err(Error::LengthMismatch(cfg.window, batch.steps));
        }
        let (b, w, m, heads) = (batch.batch, batch.steps, cfg.d_model, cfg.heads);
        let dk = m / heads;

        let x = g.constant(Tensor::new(alloc::vec![b, w, batch.width], batch.data.clone())?);
        let hx = g.matmul(x, p[ix::W_IN]);
        let hx = g.add_tiled(hx, p[ix::B_IN]);
        let hx = g.add_tiled(hx, p[ix::POS]);

        let split = |g: &mut Graph, v: Var| {
            let v = g.reshape(v, &[b, w, heads, dk]);
            let v = g.swap_axes12(v);
            g.reshape(v, &[b * heads, w, dk])
        };
        let q = g.matmul(hx, p[ix::W_Q]);
        let q = g.add_tiled(q, p[ix::B_Q]);
        let q = split(g, q);
        let k = g.matmul(hx, p[ix::W_K]);
        let k = g.add_tiled(k, p[ix::B_K]);
        let k = split(g, k);
        let v = g.matmul(hx, p[ix::W_V]);
        let v = g.add_tiled(v, p[ix::B_V]);
        let v = split(g, v);

        let scores = g.batch_matmul(q, k, true);
        let scores = g.scale(scores, 1.0 / math::sqrt(dk as f64));
        let mut mask = Vec::with_capacity(b * heads * w * w);
        for i in 0..b {
            let keys = &batch.mask[i * w..(i + 1) * w];
            for _ in 0..heads * w {
                mask.extend_from_slice(keys);
            }
        }
        let attn = g.softmax(scores, Some(mask));
        let ctx = g.batch_matmul(attn, v, false);
        let ctx = g.reshape(ctx, &[b, heads, w, dk]);
        let ctx = g.swap_axes12(ctx);
        let ctx = g.reshape(ctx, &[b, w, m]);
        let o = g.matmul(ctx, p[ix::W_O]);
        let o = g.add_tiled(o, p[ix::B_O]);

        let r1 = g.add(hx, o);
        let h1 = g.layer_norm(r1, p[ix::LN1_G], p[ix::LN1_B], LN_EPS);
        let f = g.matmul(h1, p[ix::W_FF1]);
        let f = g.add_tiled(f, p[ix::B_FF1]);
        let f = g.relu(f);
        let f = g.matmul(f, p[ix::W_FF2]);
        let f = g.add_tiled(f, p[ix::B_FF2]);
        let r2 = g.add(h1, f);
        let h2 = g.layer_norm(r2, p[ix::LN2_G], p[ix::LN2_B], LN_EPS);
        Ok((h2, attn))
    }
}

impl SequenceExpert for TransformerExpert {
    fn kind(&self) -> ExpertKind {
        ExpertKind::Transformer
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
        named(&TRANSFORMER_PARAM_NAMES, &self.params)
    }

    fn forward_graph(&self, g: &mut Graph, p: &[Var], batch: &SequenceBatch) -> Result<Var> {
        let (h2, _) = self.encode(g, p, batch)?;
        let (b, w) = (batch.batch, batch.steps);
        let mut weights = alloc::vec![0.0; b * w];
        for i in 0..b {
            let real = batch.mask[i * w..(i + 1) * w].iter().filter(|&&m| m).count();
            if real > 0 {
                for t in 0..w {
                    if batch.mask[i * w + t] {
                        weights[i * w + t] = 1.0 / real as f64;
                    }
                }
            }
        }
        let pooled = g.weighted_pool(h2, weights);
        let logit = g.matmul(pooled, p[ix::W_OUT]);
        let logit = g.add_tiled(logit, p[ix::B_OUT]);
        Ok(g.sigmoid(logit))
    }
}
