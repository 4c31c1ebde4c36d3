//! Files, configuration and the command line around `fraudlab-core`.
//!
//! `fraudlab generate` writes a synthetic dataset, `train` cross-validates
//! the mixture and fits a final model, `evaluate` scores a dataset with a
//! saved artifact, `ablate` runs the expert-removal study and `report`
//! rebuilds every table of a run directory from its prediction logs.

pub mod artifact;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod digest;
pub mod error;
pub mod report;
pub mod run;

use std::path::Path;

pub use error::{Error, Result};

/// Pretty JSON with a trailing newline.
pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::data)?;
    text.push('\n');
    std::fs::write(path, text).map_err(Error::io(path))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}
