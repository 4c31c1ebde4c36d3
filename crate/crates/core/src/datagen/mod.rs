//! Agent-based simulator for a labelled card-transaction corpus.
//!
//! The pipeline is `generate_accounts` → `simulate_transactions` →
//! `inject_fraud` → `compute_behavioral_features` → Isolation-Forest
//! scoring. [`generate_corpus`] runs all of it from a [`GeneratorConfig`].

mod accounts;
mod features;
mod fraud;
mod iforest;
mod record;
mod simulate;

use alloc::vec::Vec;

pub use accounts::{
    generate_accounts, AccountProfile, AMOUNT_MAX, AMOUNT_MIN, CITIES, TARGET_AMOUNT_MEAN, TARGET_AMOUNT_SD,
};
pub use features::{compute_behavioral_features, compute_behavioral_features_with, merchant_entropy, FeatureWindows};
pub use fraud::{fraud_count, inject_fraud, inject_fraud_with, FraudSpec, TypologyMix, DEFAULT_NEAR_BOUNDARY_SHARE};
pub use iforest::{average_path_length, IsolationForest};
pub use record::{
    DeviceType, FraudType, GeoPoint, IpAddress, Label, MerchantCategory, TransactionRecord, TransactionType,
    EARTH_RADIUS_KM, SCHEMA_COLUMNS,
};
pub use simulate::{simulate_transactions, LOCAL_SCATTER_KM};

use crate::error::{Error, Result};
use crate::math;
use crate::rng::derive_seed;

/// Everything that shapes a generated corpus, apart from the seed.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GeneratorConfig {
    pub n_transactions: usize,
    pub n_accounts: usize,
    pub fraud_rate: f64,
    pub typology_mix: TypologyMix,
    pub near_boundary_share: f64,
    /// Simulated days; derived from the target size when absent.
    pub horizon_days: Option<f64>,
    pub windows: FeatureWindows,
    pub iforest_trees: usize,
    pub iforest_subsample: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_transactions: 50_000,
            n_accounts: 2_000,
            fraud_rate: 0.015,
            typology_mix: TypologyMix::default(),
            near_boundary_share: DEFAULT_NEAR_BOUNDARY_SHARE,
            horizon_days: None,
            windows: FeatureWindows::default(),
            iforest_trees: 100,
            iforest_subsample: 256,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_accounts == 0 {
            return Err(Error::Empty("n_accounts"));
        }
        if self.n_transactions == 0 {
            return Err(Error::Empty("n_transactions"));
        }
        if !(0.0..0.5).contains(&self.fraud_rate) {
            return Err(Error::invalid("fraud_rate must lie in [0, 0.5)"));
        }
        if !(0.0..=1.0).contains(&self.near_boundary_share) {
            return Err(Error::invalid("near_boundary_share must lie in [0, 1]"));
        }
        self.typology_mix.validate()?;
        self.windows.validate()?;
        if let Some(h) = self.horizon_days {
            if !(h >= 1.0) || !h.is_finite() {
                return Err(Error::invalid("horizon_days must be at least 1"));
            }
        }
        if self.iforest_trees == 0 || self.iforest_subsample < 2 {
            return Err(Error::invalid("isolation forest needs at least one tree and a subsample of two"));
        }
        Ok(())
    }

    /// Legitimate rows needed so the injected frauds bring the total to `n_transactions`.
    pub fn legit_count(&self) -> usize {
        self.n_transactions - math::round(self.n_transactions as f64 * self.fraud_rate) as usize
    }
}

/// A generated corpus and the accounts behind it.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub accounts: Vec<AccountProfile>,
    pub records: Vec<TransactionRecord>,
    pub horizon_days: f64,
}

/// Inputs to the generator-side Isolation Forest, one row per record.
pub fn anomaly_features(t: &TransactionRecord) -> [f64; 6] {
    [
        math::ln(1.0 + t.transaction_amount.max(0.0)),
        math::ln(1.0 + t.geolocation_deviation),
        t.spending_behavior_score,
        t.transaction_frequency as f64,
        math::ln(1.0 + t.avg_transaction_interval),
        t.merchant_entropy,
    ]
}

/// Run the full generator. The result is a pure function of `(cfg, seed)`.
pub fn generate_corpus(cfg: &GeneratorConfig, seed: u64) -> Result<Corpus> {
    cfg.validate()?;
    let accounts = generate_accounts(cfg.n_accounts, derive_seed(seed, 1))?;
    let n_legit = cfg.legit_count();
    let sim_seed = derive_seed(seed, 2);

    let (legit, horizon_days) = match cfg.horizon_days {
        Some(h) => (simulate_transactions(&accounts, h, Some(n_legit), sim_seed)?, h),
        None => {
            let daily: f64 = accounts.iter().map(|a| a.activity_rate).sum();
            let mut h = math::ceil(1.1 * n_legit as f64 / daily).max(1.0);
            loop {
                let s = simulate_transactions(&accounts, h, Some(n_legit), sim_seed)?;
                if s.len() >= n_legit {
                    break (s, h);
                }
                h = math::ceil(h * 1.25);
            }
        }
    };

    let spec = FraudSpec { rate: cfg.fraud_rate, mix: cfg.typology_mix, near_boundary_share: cfg.near_boundary_share };
    let labelled = inject_fraud_with(legit, &spec, derive_seed(seed, 3))?;
    let mut records = compute_behavioral_features_with(labelled, &cfg.windows)?;

    let matrix: Vec<f64> = records.iter().flat_map(anomaly_features).collect();
    let psi = cfg.iforest_subsample.min(records.len());
    let forest = IsolationForest::fit(&matrix, 6, cfg.iforest_trees, psi, derive_seed(seed, 4))?;
    for (t, s) in records.iter_mut().zip(forest.score_rows(&matrix)?) {
        t.anomaly_score = s;
    }
    Ok(Corpus { accounts, records, horizon_days })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GeneratorConfig {
        GeneratorConfig { n_transactions: 4000, n_accounts: 150, ..GeneratorConfig::default() }
    }

    #[test]
    fn corpus_has_requested_size_and_bounded_scores() {
        let c = generate_corpus(&small(), 1).unwrap();
        assert_eq!(c.records.len(), 4000);
        let frauds = c.records.iter().filter(|t| t.is_fraud()).count();
        assert_eq!(frauds, 60);
        for t in &c.records {
            assert!(t.anomaly_score > 0.0 && t.anomaly_score < 1.0);
            assert!((0.0..=1.0).contains(&t.spending_behavior_score));
            assert!(t.geolocation_deviation >= 0.0);
            assert!((1.0..=10_000.0).contains(&t.transaction_amount));
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        let a = generate_corpus(&small(), 3).unwrap();
        let b = generate_corpus(&small(), 3).unwrap();
        assert_eq!(a.records, b.records);
        let c = generate_corpus(&small(), 4).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = small();
        cfg.fraud_rate = 0.7;
        assert!(generate_corpus(&cfg, 1).is_err());
        let mut cfg = small();
        cfg.typology_mix.other = 0.5;
        assert!(generate_corpus(&cfg, 1).is_err());
    }

    #[test]
    fn fraud_rows_are_more_anomalous_on_average() {
        let c = generate_corpus(&small(), 2).unwrap();
        let mean = |fraud: bool| {
            let v: Vec<f64> = c.records.iter().filter(|t| t.is_fraud() == fraud).map(|t| t.anomaly_score).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(true) > mean(false));
    }
}
