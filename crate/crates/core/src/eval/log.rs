use crate::datagen::{FraudType, TransactionType};
use crate::moe::EXPERT_COUNT;

/// One scored row of the per-row prediction log.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictionRecord {
    pub row: usize,
    pub fold: usize,
    pub label: bool,
    pub fraud_type: FraudType,
    pub transaction_type: TransactionType,
    /// Mixture probability.
    pub y: f64,
    pub g: [f64; EXPERT_COUNT],
    /// `[lstm, transformer, autoencoder]`.
    pub expert_outputs: [f64; EXPERT_COUNT],
    pub ae_error: f64,
    pub ae_tau: f64,
    /// Mixture probability with expert `i` removed and the gate retrained.
    pub ablation_y: Option<[f64; EXPERT_COUNT]>,
    /// Gate weights of the gate trained without the entropy term.
    pub g_unregularized: Option<[f64; EXPERT_COUNT]>,
}

impl PredictionRecord {
    /// Structural-outlier fraud, the subset the anomaly detector targets.
    pub fn is_structural(&self) -> bool {
        self.fraud_type == FraudType::Other
    }

    pub fn ae_flag(&self) -> bool {
        self.ae_error > self.ae_tau
    }
}
