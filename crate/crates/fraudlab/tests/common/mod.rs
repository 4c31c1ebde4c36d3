#![allow(dead_code)]

use fraudlab::config::PipelineConfig;

/// Small enough for a full train in a couple of seconds.
pub const TINY: &str = r#"
seed = 5

[generator]
n_accounts = 150
n_transactions = 3000
fraud_rate = 0.05

[pipeline]
k_folds = 2
holdout_folds = 2
window = 5

[pipeline.experts]
lstm_hidden = 8
d_model = 8
heads = 2
ffn = 16
ae_hidden = 8
ae_bottleneck = 4

[pipeline.expert_training]
max_epochs = 3
batches_per_epoch = 4

[pipeline.autoencoder_training]
max_epochs = 3
batches_per_epoch = 4

[pipeline.gate_training]
max_epochs = 3
batches_per_epoch = 4

[studies]
window_days = [7, 30]
"#;

pub fn tiny() -> PipelineConfig {
    PipelineConfig::from_toml_str(TINY).unwrap()
}
