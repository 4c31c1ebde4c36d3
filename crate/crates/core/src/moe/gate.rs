use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::experts::{
    AutoencoderExpert, ExpertKind, LstmExpert, RowBatch, SequenceBatch, SequenceExpert, TrainConfig, TrainReport,
    TransformerExpert, train_params,
};
use crate::math;
use crate::numerics::{Graph, Tensor, Var};

pub const EXPERT_COUNT: usize = 3;
pub const DEFAULT_ENTROPY_LAMBDA: f64 = 0.01;

/// What the gate looks at.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GateInput {
    /// Encoded features of the window's final transaction.
    #[default]
    Features,
    /// The three expert outputs.
    ExpertOutputs,
}

/// Affine map to one logit per expert, followed by a softmax over the
/// active experts. Inactive experts always receive weight 0.
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    pub weight: Tensor,
    pub bias: Tensor,
    pub lambda: f64,
    pub input: GateInput,
    pub active: [bool; EXPERT_COUNT],
}

impl GateParams {
    pub fn zeros(input_width: usize, input: GateInput, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(alloc::format!("entropy coefficient must be non-negative, got {lambda}")));
        }
        if input_width == 0 {
            return Err(Error::invalid("gate input width must be positive"));
        }
        Ok(GateParams {
            weight: Tensor::zeros(&[input_width, EXPERT_COUNT]),
            bias: Tensor::zeros(&[EXPERT_COUNT]),
            lambda,
            input,
            active: [true; EXPERT_COUNT],
        })
    }

    pub fn input_width(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn without(mut self, expert: ExpertKind) -> Self {
        self.active[expert_index(expert)] = false;
        self
    }

    fn check(&self) -> Result<()> {
        if self.weight.shape().len() != 2 || self.weight.shape()[1] != EXPERT_COUNT || self.bias.shape() != [EXPERT_COUNT]
        {
            return Err(Error::WidthMismatch { expected: EXPERT_COUNT, got: *self.weight.shape().last().unwrap_or(&0) });
        }
        if !self.active.iter().any(|&a| a) {
            return Err(Error::invalid("gate needs at least one active expert"));
        }
        Ok(())
    }
}

pub fn expert_index(kind: ExpertKind) -> usize {
    match kind {
        ExpertKind::Lstm => 0,
        ExpertKind::Transformer => 1,
        ExpertKind::Autoencoder => 2,
    }
}

/// Gate weights for one input row.
pub fn gate_forward(x: &[f64], params: &GateParams) -> Result<[f64; EXPERT_COUNT]> {
    params.check()?;
    let d = params.input_width();
    if x.len() != d {
        return Err(Error::WidthMismatch { expected: d, got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue);
    }
    let w = params.weight.data();
    let mut logits = [0.0; EXPERT_COUNT];
    for (j, l) in logits.iter_mut().enumerate() {
        *l = params.bias.data()[j] + (0..d).map(|i| x[i] * w[i * EXPERT_COUNT + j]).sum::<f64>();
    }
    let max = (0..EXPERT_COUNT).filter(|&j| params.active[j]).map(|j| logits[j]).fold(f64::NEG_INFINITY, f64::max);
    let mut g = [0.0; EXPERT_COUNT];
    let mut z = 0.0;
    for j in 0..EXPERT_COUNT {
        if params.active[j] {
            g[j] = math::exp(logits[j] - max);
            z += g[j];
        }
    }
    for v in &mut g {
        *v /= z;
    }
    Ok(g)
}

/// `Σ g_i E_i`, clipped to the range of the expert outputs it mixes.
pub fn combine(g: &[f64; EXPERT_COUNT], e: &[f64; EXPERT_COUNT]) -> f64 {
    let y: f64 = g.iter().zip(e).map(|(a, b)| a * b).sum();
    let (lo, hi) = g
        .iter()
        .zip(e)
        .filter(|(w, _)| **w > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &v)| (lo.min(v), hi.max(v)));
    if lo > hi {
        y
    } else {
        y.clamp(lo, hi)
    }
}

/// Shannon entropy (nats) of a weight vector.
pub fn gate_entropy(g: &[f64]) -> f64 {
    -g.iter().filter(|&&v| v > 0.0).map(|&v| v * math::ln(v)).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GateOutput {
    pub g: [f64; EXPERT_COUNT],
    pub y: f64,
    pub expert_outputs: [f64; EXPERT_COUNT],
}

/// The three experts. A missing member is the untrained sentinel.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpertSet {
    pub lstm: Option<LstmExpert>,
    pub transformer: Option<TransformerExpert>,
    pub autoencoder: Option<AutoencoderExpert>,
}

impl ExpertSet {
    /// Per-row `[lstm, transformer, autoencoder]` outputs. The autoencoder
    /// reads its view of the final row of each window.
    pub fn outputs(&self, batch: &SequenceBatch) -> Result<Vec<[f64; EXPERT_COUNT]>> {
        let lstm = self.lstm.as_ref().ok_or(Error::UntrainedExpert("lstm"))?;
        let tf = self.transformer.as_ref().ok_or(Error::UntrainedExpert("transformer"))?;
        let ae = self.autoencoder.as_ref().ok_or(Error::UntrainedExpert("autoencoder"))?;
        let a = lstm.predict(batch)?;
        let b = tf.predict(batch)?;
        let rows = RowBatch::new(batch.width, batch.final_rows(), batch.targets.clone())?;
        let c = ae.predict(&ae.view_rows(&rows)?)?;
        Ok((0..batch.batch).map(|i| [a[i], b[i], c[i]]).collect())
    }
}

/// Gate inputs, frozen expert outputs and targets for a set of windows.
#[derive(Clone, Debug, PartialEq)]
pub struct GateData {
    pub width: usize,
    pub inputs: Vec<f64>,
    pub outputs: Vec<[f64; EXPERT_COUNT]>,
    pub targets: Vec<f64>,
}

impl GateData {
    pub fn new(width: usize, inputs: Vec<f64>, outputs: Vec<[f64; EXPERT_COUNT]>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != width * outputs.len() {
            return Err(Error::ShapeMismatch { shape: alloc::vec![outputs.len(), width], len: inputs.len() });
        }
        if targets.len() != outputs.len() {
            return Err(Error::LengthMismatch(targets.len(), outputs.len()));
        }
        if inputs.iter().chain(outputs.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(GateData { width, inputs, outputs, targets })
    }

    pub fn from_outputs(batch: &SequenceBatch, outputs: Vec<[f64; EXPERT_COUNT]>, input: GateInput) -> Result<Self> {
        let (width, inputs) = match input {
            GateInput::Features => (batch.width, batch.final_rows()),
            GateInput::ExpertOutputs => (EXPERT_COUNT, outputs.iter().flatten().copied().collect()),
        };
        GateData::new(width, inputs, outputs, batch.targets.clone())
    }

    pub fn from_batch(experts: &ExpertSet, batch: &SequenceBatch, input: GateInput) -> Result<Self> {
        GateData::from_outputs(batch, experts.outputs(batch)?, input)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> GateData {
        let d = self.width;
        let mut inputs = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            inputs.extend_from_slice(&self.inputs[i * d..(i + 1) * d]);
        }
        GateData {
            width: d,
            inputs,
            outputs: idx.iter().map(|&i| self.outputs[i]).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
        }
    }
}

/// Gate weights `[n, 3]` and combined probabilities `[n, 1]` on a graph.
pub fn gate_graph(g: &mut Graph, weight: Var, bias: Var, data: &GateData, active: [bool; EXPERT_COUNT]) -> (Var, Var) {
    let n = data.len();
    let x = g.constant(Tensor::from_parts(alloc::vec![n, data.width], data.inputs.clone()));
    let logits = g.matmul(x, weight);
    let logits = g.add_tiled(logits, bias);
    let mask = (0..n).flat_map(|_| active).collect();
    let gates = g.softmax(logits, Some(mask));
    let e = g.constant(Tensor::from_parts(alloc::vec![n, EXPERT_COUNT], data.outputs.iter().flatten().copied().collect()));
    let mixed = g.mul(gates, e);
    let ones = g.constant(Tensor::full(&[EXPERT_COUNT, 1], 1.0));
    let y = g.matmul(mixed, ones);
    (gates, y)
}

/// Weighted cross-entropy of the mixture minus `lambda` times the mean gate
/// entropy.
pub fn gate_objective(
    g: &mut Graph,
    weight: Var,
    bias: Var,
    data: &GateData,
    active: [bool; EXPERT_COUNT],
    lambda: f64,
    class_weights: (f64, f64),
) -> Var {
    let (gates, y) = gate_graph(g, weight, bias, data, active);
    let w = data.targets.iter().map(|&t| if t > 0.5 { class_weights.0 } else { class_weights.1 }).collect();
    let bce = g.weighted_bce(y, data.targets.clone(), w);
    if lambda == 0.0 {
        return bce;
    }
    let logs = g.ln(gates);
    let plogp = g.mul(gates, logs);
    let neg_entropy = g.sum(plogp);
    let reg = g.scale(neg_entropy, lambda / data.len() as f64);
    g.add(bce, reg)
}

/// Fit the gate on frozen expert outputs. Experts are not touched: only the
/// gate's weight and bias are graph parameters.
pub fn train_gate(
    init: GateParams,
    train: &GateData,
    validation: &GateData,
    cfg: &TrainConfig,
    class_weights: (f64, f64),
) -> Result<(GateParams, TrainReport)> {
    init.check()?;
    if !(init.lambda >= 0.0 && init.lambda.is_finite()) {
        return Err(Error::invalid(alloc::format!("entropy coefficient must be non-negative, got {}", init.lambda)));
    }
    if train.width != init.input_width() || validation.width != init.input_width() {
        return Err(Error::WidthMismatch { expected: init.input_width(), got: train.width });
    }
    if validation.is_empty() {
        return Err(Error::Empty("gate validation split"));
    }
    let (lambda, active) = (init.lambda, init.active);
    let mut params = alloc::vec![init.weight.clone(), init.bias.clone()];
    let report = train_params(
        &mut params,
        train.len(),
        cfg,
        |g, p, idx| Ok(gate_objective(g, p[0], p[1], &train.select(idx), active, lambda, class_weights)),
        |p| {
            let mut g = Graph::new();
            let w = g.constant(p[0].clone());
            let b = g.constant(p[1].clone());
            let loss = gate_objective(&mut g, w, b, validation, active, lambda, class_weights);
            Ok(g.value(loss).item())
        },
    )?;
    let mut bias = params.pop().ok_or(Error::Empty("gate params"))?;
    let weight = params.pop().ok_or(Error::Empty("gate params"))?;
    for (j, b) in bias.data_mut().iter_mut().enumerate() {
        if !active[j] {
            *b = 0.0;
        }
    }
    Ok((GateParams { weight, bias, ..init }, report))
}

/// Gate and mixture outputs for every row of `data`.
pub fn gate_predict(data: &GateData, gate: &GateParams) -> Result<Vec<GateOutput>> {
    if data.width != gate.input_width() {
        return Err(Error::WidthMismatch { expected: gate.input_width(), got: data.width });
    }
    let d = data.width;
    (0..data.len())
        .map(|i| {
            let g = gate_forward(&data.inputs[i * d..(i + 1) * d], gate)?;
            let e = data.outputs[i];
            Ok(GateOutput { g, y: combine(&g, &e), expert_outputs: e })
        })
        .collect()
}

/// Run the experts and the gate on a batch of windows.
pub fn moe_predict(batch: &SequenceBatch, experts: &ExpertSet, gate: &GateParams) -> Result<Vec<GateOutput>> {
    gate_predict(&GateData::from_batch(experts, batch, gate.input)?, gate)
}
