//! Model artifact: one JSON document holding the fitted preprocessing
//! state, the three experts, the gate and the training metadata.
//!
//! Parameter arrays are stored as named, shaped blocks whose data is the
//! lowercase hex encoding of the little-endian `f64` bytes. Saving a loaded
//! artifact reproduces the original file byte for byte.

use std::path::Path;

use fraudlab_core::eval::{FittedModel, TrainingReports};
use fraudlab_core::experts::{
    AutoencoderConfig, AutoencoderExpert, LstmConfig, LstmExpert, SequenceExpert, ThresholdCalibration,
    TransformerConfig, TransformerExpert, AUTOENCODER_PARAM_NAMES, LSTM_PARAM_NAMES, TRANSFORMER_PARAM_NAMES,
};
use fraudlab_core::moe::{ExpertSet, GateInput, GateParams, EXPERT_COUNT};
use fraudlab_core::numerics::Tensor;
use fraudlab_core::preprocess::{CategoricalEncoding, ScalerStats};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    /// Hex of the little-endian bytes of each value, row-major.
    pub data: String,
}

impl ParamBlock {
    pub fn encode(name: &str, t: &Tensor) -> Self {
        let bytes: Vec<u8> = t.data().iter().flat_map(|v| v.to_le_bytes()).collect();
        ParamBlock { name: name.to_string(), shape: t.shape().to_vec(), data: hex::encode(bytes) }
    }

    pub fn decode(&self) -> Result<Tensor> {
        let bytes = hex::decode(&self.data).map_err(|e| Error::Artifact(format!("block `{}`: {e}", self.name)))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Artifact(format!("block `{}`: {} bytes is not a whole number of f64", self.name, bytes.len())));
        }
        let data = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        Tensor::new(self.shape.clone(), data).map_err(|e| Error::Artifact(format!("block `{}`: {e}", self.name)))
    }
}

fn encode_all(named: Vec<(&'static str, &Tensor)>) -> Vec<ParamBlock> {
    named.into_iter().map(|(n, t)| ParamBlock::encode(n, t)).collect()
}

fn decode_all(blocks: &[ParamBlock], names: &[&str], expert: &str) -> Result<Vec<Tensor>> {
    if blocks.len() != names.len() || blocks.iter().zip(names).any(|(b, n)| b.name != *n) {
        return Err(Error::Artifact(format!(
            "{expert}: expected parameter blocks {names:?}, got {:?}",
            blocks.iter().map(|b| b.name.as_str()).collect::<Vec<_>>()
        )));
    }
    blocks.iter().map(ParamBlock::decode).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LstmBlock {
    pub config: LstmConfig,
    pub params: Vec<ParamBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerBlock {
    pub config: TransformerConfig,
    pub params: Vec<ParamBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoencoderBlock {
    pub config: AutoencoderConfig,
    /// Feature-frame columns the autoencoder reads, in order.
    pub view: Vec<usize>,
    pub threshold: f64,
    pub params: Vec<ParamBlock>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertBlocks {
    pub lstm: LstmBlock,
    pub transformer: TransformerBlock,
    pub autoencoder: AutoencoderBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateBlock {
    pub input: GateInput,
    pub lambda: f64,
    pub active: [bool; EXPERT_COUNT],
    pub weight: ParamBlock,
    pub bias: ParamBlock,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetadata {
    /// Master seed the final fit was derived from.
    pub seed: u64,
    pub rows: usize,
    pub synthetic_rows: usize,
    pub class_weights: (f64, f64),
    pub reports: TrainingReports,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArtifact {
    pub format_version: u64,
    pub config: PipelineConfig,
    pub scaler: Option<ScalerStats>,
    pub encoding: CategoricalEncoding,
    pub experts: ExpertBlocks,
    pub gate: GateBlock,
    /// Reconstruction-error threshold of the autoencoder detector.
    pub tau: f64,
    pub calibration: ThresholdCalibration,
    pub training: TrainingMetadata,
}

impl ModelArtifact {
    pub fn from_model(model: &FittedModel, config: &PipelineConfig, rows: usize) -> Result<Self> {
        let missing = |n: &str| Error::Artifact(format!("{n} expert is untrained"));
        let lstm = model.experts.lstm.as_ref().ok_or_else(|| missing("lstm"))?;
        let tf = model.experts.transformer.as_ref().ok_or_else(|| missing("transformer"))?;
        let ae = model.experts.autoencoder.as_ref().ok_or_else(|| missing("autoencoder"))?;
        let view = ae.view().ok_or_else(|| Error::Artifact("autoencoder has no column view".into()))?;
        Ok(ModelArtifact {
            format_version: FORMAT_VERSION,
            config: config.clone(),
            scaler: model.scaler.clone(),
            encoding: model.encoding.clone(),
            experts: ExpertBlocks {
                lstm: LstmBlock { config: lstm.config, params: encode_all(lstm.named_params()) },
                transformer: TransformerBlock { config: tf.config, params: encode_all(tf.named_params()) },
                autoencoder: AutoencoderBlock {
                    config: ae.config,
                    view: view.to_vec(),
                    threshold: ae.threshold().unwrap_or(model.calibration.tau),
                    params: encode_all(ae.named_params()),
                },
            },
            gate: GateBlock {
                input: model.gate.input,
                lambda: model.gate.lambda,
                active: model.gate.active,
                weight: ParamBlock::encode("weight", &model.gate.weight),
                bias: ParamBlock::encode("bias", &model.gate.bias),
            },
            tau: model.calibration.tau,
            calibration: model.calibration,
            training: TrainingMetadata {
                seed: config.seed,
                rows,
                synthetic_rows: model.synthetic_rows,
                class_weights: model.class_weights,
                reports: model.reports.clone(),
            },
        })
    }

    pub fn to_model(&self) -> Result<FittedModel> {
        let core = |e: fraudlab_core::Error| Error::Artifact(e.to_string());
        let b = &self.experts;
        let lstm = LstmExpert::from_params(b.lstm.config, decode_all(&b.lstm.params, &LSTM_PARAM_NAMES, "lstm")?)
            .map_err(core)?;
        let transformer = TransformerExpert::from_params(
            b.transformer.config,
            decode_all(&b.transformer.params, &TRANSFORMER_PARAM_NAMES, "transformer")?,
        )
        .map_err(core)?;
        let ae = &b.autoencoder;
        let autoencoder = AutoencoderExpert::from_params(
            ae.config,
            decode_all(&ae.params, &AUTOENCODER_PARAM_NAMES, "autoencoder")?,
            Some(ae.threshold),
        )
        .and_then(|e| e.with_view(ae.view.clone()))
        .map_err(core)?;
        let weight = self.gate.weight.decode()?;
        let bias = self.gate.bias.decode()?;
        if weight.shape().len() != 2 || weight.shape()[1] != EXPERT_COUNT || bias.shape() != [EXPERT_COUNT] {
            return Err(Error::Artifact(format!("gate shapes {:?} and {:?}", weight.shape(), bias.shape())));
        }
        Ok(FittedModel {
            encoding: self.encoding.clone(),
            scaler: self.scaler.clone(),
            experts: ExpertSet { lstm: Some(lstm), transformer: Some(transformer), autoencoder: Some(autoencoder) },
            gate: GateParams { weight, bias, lambda: self.gate.lambda, input: self.gate.input, active: self.gate.active },
            calibration: self.calibration,
            class_weights: self.training.class_weights,
            synthetic_rows: self.training.synthetic_rows,
            reports: self.training.reports.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Artifact(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Parse an artifact, refusing any format version other than
    /// [`FORMAT_VERSION`] before looking at the rest of the document.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Artifact(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Artifact("missing format_version".into()))?;
        if found != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion { found, supported: FORMAT_VERSION });
        }
        let artifact: ModelArtifact = serde_json::from_value(value).map_err(|e| Error::Artifact(e.to_string()))?;
        artifact.config.validate()?;
        Ok(artifact)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::from_json(&text)
    }
}
