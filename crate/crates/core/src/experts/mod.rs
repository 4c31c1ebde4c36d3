//! Expert models: an LSTM and a single-block Transformer encoder over
//! per-card windows, and a bottleneck autoencoder over the final row.

mod autoencoder;
mod batch;
mod lstm;
mod threshold;
mod train;
mod transformer;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{Graph, Tensor, Var};

pub use autoencoder::{ae_probability, AutoencoderConfig, AutoencoderExpert, AUTOENCODER_PARAM_NAMES};
pub use batch::{RowBatch, SequenceBatch};
pub use lstm::{LstmConfig, LstmExpert, LSTM_PARAM_NAMES};
pub use threshold::{calibrate_anomaly_threshold, ThresholdCalibration};
pub use train::{train_params, EpochLoss, TrainConfig, TrainReport};
pub use transformer::{TransformerConfig, TransformerExpert, TRANSFORMER_PARAM_NAMES};

/// Rows per graph when predicting in bulk.
pub const PREDICT_CHUNK: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ExpertKind {
    Lstm,
    Transformer,
    Autoencoder,
}

impl ExpertKind {
    pub const ALL: [ExpertKind; 3] = [ExpertKind::Lstm, ExpertKind::Transformer, ExpertKind::Autoencoder];

    pub fn as_str(self) -> &'static str {
        match self {
            ExpertKind::Lstm => "lstm",
            ExpertKind::Transformer => "transformer",
            ExpertKind::Autoencoder => "autoencoder",
        }
    }
}

impl core::fmt::Display for ExpertKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for ExpertKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExpertKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(alloc::format!("unknown expert `{s}`")))
    }
}

/// A supervised classifier over sequence windows.
pub trait SequenceExpert {
    fn kind(&self) -> ExpertKind;
    fn input_width(&self) -> usize;
    fn params(&self) -> &[Tensor];
    fn params_mut(&mut self) -> &mut Vec<Tensor>;
    fn named_params(&self) -> Vec<(&'static str, &Tensor)>;

    /// Fraud probabilities `[batch, 1]` with `p` bound to [`Self::params`].
    fn forward_graph(&self, g: &mut Graph, p: &[Var], batch: &SequenceBatch) -> Result<Var>;

    fn predict(&self, batch: &SequenceBatch) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(batch.batch);
        let mut start = 0;
        while start < batch.batch {
            let len = PREDICT_CHUNK.min(batch.batch - start);
            let chunk = batch.slice(start, len);
            let mut g = Graph::new();
            let p: Vec<Var> = self.params().iter().map(|t| g.constant(t.clone())).collect();
            let y = self.forward_graph(&mut g, &p, &chunk)?;
            out.extend_from_slice(g.value(y).data());
            start += len;
        }
        Ok(out)
    }
}

pub(crate) fn named<'a>(names: &[&'static str], params: &'a [Tensor]) -> Vec<(&'static str, &'a Tensor)> {
    names.iter().copied().zip(params.iter()).collect()
}

pub(crate) fn check_shapes(expected: &[Tensor], got: &[Tensor]) -> Result<()> {
    if expected.len() != got.len() {
        return Err(Error::LengthMismatch(expected.len(), got.len()));
    }
    for (e, g) in expected.iter().zip(got) {
        if e.shape() != g.shape() {
            return Err(Error::ShapeMismatch { shape: e.shape().to_vec(), len: g.len() });
        }
        if !g.all_finite() {
            return Err(Error::NonFiniteValue);
        }
    }
    Ok(())
}
