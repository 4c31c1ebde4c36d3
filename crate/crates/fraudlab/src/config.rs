//! TOML run configuration.
//!
//! ```toml
//! seed = 42
//! output_dir = "runs/seed42"
//!
//! [generator]
//! n_transactions = 50000
//! fraud_rate = 0.015
//!
//! [pipeline]
//! window = 10
//! lambda = 0.01
//!
//! [studies]
//! window_days = [7, 15, 30]
//! ```
//!
//! Every section is optional and every key has a default. Unknown keys are
//! rejected. The seed lives only at the top level and drives both the
//! generator and the pipeline.

use std::path::{Path, PathBuf};

use fraudlab_core::datagen::GeneratorConfig;
use fraudlab_core::eval::PipelineSettings;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lookback lengths the command line accepts.
pub const WINDOW_DAYS: [u32; 3] = [7, 15, 30];

/// Extra cross-validation runs behind the preprocessing and time-window
/// tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub preprocessing: bool,
    pub time_windows: bool,
    pub window_days: Vec<u32>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig { preprocessing: true, time_windows: true, window_days: WINDOW_DAYS.to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub generator: GeneratorConfig,
    pub pipeline: PipelineSettings,
    pub studies: StudyConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let pipeline = PipelineSettings::default();
        PipelineConfig {
            seed: pipeline.seed,
            output_dir: None,
            generator: GeneratorConfig::default(),
            pipeline,
            studies: StudyConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub no_smote: bool,
    pub window_days: Option<u32>,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        if value.get("pipeline").and_then(|p| p.get("seed")).is_some() {
            return Err(Error::Config("set `seed` at the top level, not under [pipeline]".into()));
        }
        let mut cfg: PipelineConfig = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.pipeline.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        let mut snapshot = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(toml::Value::Table(p)) = snapshot.get_mut("pipeline") {
            p.remove("seed");
        }
        toml::to_string(&snapshot).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = Some(dir.clone());
        }
        if o.no_smote {
            self.pipeline.smote = false;
        }
        if let Some(days) = o.window_days {
            self.pipeline.lookback_days = f64::from(days);
        }
        self.pipeline.seed = self.seed;
        self.validate()
    }

    /// Check every value against the preconditions of the stage that reads it.
    pub fn validate(&self) -> Result<()> {
        let config = |e: fraudlab_core::Error| Error::Config(e.to_string());
        self.generator.validate().map_err(config)?;
        self.pipeline.validate().map_err(config)?;
        if self.pipeline.seed != self.seed {
            return Err(Error::Config("pipeline seed differs from the top-level seed".into()));
        }
        if self.studies.time_windows && self.studies.window_days.is_empty() {
            return Err(Error::Config("time-window study needs at least one window length".into()));
        }
        if self.studies.window_days.contains(&0) {
            return Err(Error::Config("window lengths must be positive".into()));
        }
        let mut days = self.studies.window_days.clone();
        days.sort_unstable();
        days.dedup();
        if days.len() != self.studies.window_days.len() {
            return Err(Error::Config("window lengths must be distinct".into()));
        }
        Ok(())
    }

    pub fn output_dir(&self) -> Result<&Path> {
        self.output_dir.as_deref().ok_or_else(|| Error::Config("no output directory (use --out)".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = PipelineConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = PipelineConfig::from_toml_str(
            "seed = 7\n[generator]\nn_transactions = 2000\n[pipeline]\nwindow = 5\n[pipeline.experts]\nlstm_hidden = 8\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.pipeline.seed, 7);
        assert_eq!(cfg.generator.n_transactions, 2000);
        assert_eq!(cfg.pipeline.window, 5);
        assert_eq!(cfg.pipeline.experts.lstm_hidden, 8);
        assert_eq!(cfg.pipeline.experts.d_model, 32);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for text in ["[pipeline]\nk_folds = 1\n", "[generator]\nfraud_rate = 0.7\n", "[pipeline.experts]\nheads = 5\n", "[pipeline]\nseed = 3\n"] {
            let err = PipelineConfig::from_toml_str(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn snapshot_round_trips() {
        let mut cfg = PipelineConfig::default();
        cfg.apply(&Overrides { seed: Some(11), no_smote: true, window_days: Some(15), output_dir: Some("x".into()) })
            .unwrap();
        let back = PipelineConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.pipeline.lookback_days, 15.0);
        assert!(!back.pipeline.smote);
    }
}
