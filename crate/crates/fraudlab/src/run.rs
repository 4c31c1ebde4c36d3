//! Cross-validation driver: folds run on a rayon pool and are merged in
//! fold order, so the output does not depend on the thread count.

use fraudlab_core::datagen::TransactionRecord;
use fraudlab_core::eval::{prepare, run_fold, FoldResult, PipelineSettings, PredictionRecord, PreparedData};
use fraudlab_core::experts::ThresholdCalibration;
use fraudlab_core::preprocess::{CategoricalEncoding, ScalerStats};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::digest::experts_digest;
use crate::error::{Error, Result};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "FRAUDLAB_THREADS";

/// Worker count from [`THREADS_ENV`], or the machine's parallelism.
pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Per-fold record of what was fitted and the freeze-contract digests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub synthetic_rows: usize,
    pub class_weights: (f64, f64),
    pub calibration: ThresholdCalibration,
    pub best_epochs: [usize; 4],
    /// Expert parameters before and after gate training.
    pub experts_before_gate: String,
    pub experts_after_gate: String,
    pub encoding: CategoricalEncoding,
    pub scaler: Option<ScalerStats>,
}

impl FoldSummary {
    fn of(r: &FoldResult) -> Self {
        let m = &r.model;
        FoldSummary {
            fold: r.fold,
            train_rows: r.train_rows,
            test_rows: r.test_rows.len(),
            synthetic_rows: m.synthetic_rows,
            class_weights: m.class_weights,
            calibration: m.calibration,
            best_epochs: [
                m.reports.lstm.best_epoch,
                m.reports.transformer.best_epoch,
                m.reports.autoencoder.best_epoch,
                m.reports.gate.best_epoch,
            ],
            experts_before_gate: experts_digest(&r.frozen_experts),
            experts_after_gate: experts_digest(&m.experts),
            encoding: m.encoding.clone(),
            scaler: m.scaler.clone(),
        }
    }
}

/// One complete cross-validation run.
#[derive(Clone, Debug)]
pub struct CvRun {
    pub predictions: Vec<PredictionRecord>,
    pub folds: Vec<FoldSummary>,
    pub assignment: Vec<usize>,
}

/// Run every fold of `data` on at most `threads` workers.
pub fn cross_validate(data: &PreparedData, settings: &PipelineSettings, threads: usize) -> Result<CvRun> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.clamp(1, settings.k_folds))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<_> = pool.install(|| {
        (0..settings.k_folds).into_par_iter().map(|fold| run_fold(data, fold, settings)).collect()
    });
    let mut predictions = Vec::with_capacity(data.table.rows());
    let mut folds = Vec::with_capacity(settings.k_folds);
    for (fold, r) in results.into_iter().enumerate() {
        let r = r.map_err(|source| Error::Fold { fold, source })?;
        let summary = FoldSummary::of(&r);
        if summary.experts_before_gate != summary.experts_after_gate {
            return Err(Error::FreezeViolation { fold });
        }
        predictions.extend(r.predictions);
        folds.push(summary);
    }
    Ok(CvRun { predictions, folds, assignment: data.folds.clone() })
}

/// A named variant run behind one row of a study table.
#[derive(Clone, Debug)]
pub struct VariantRun {
    pub name: String,
    pub settings: PipelineSettings,
    pub run: CvRun,
}

/// The main run plus the preprocessing and time-window variants.
#[derive(Clone, Debug)]
pub struct StudyRuns {
    pub main: CvRun,
    pub preprocessing: Vec<VariantRun>,
    pub time_windows: Vec<VariantRun>,
}

pub const PREPROCESSING_VARIANTS: [&str; 3] = ["without_normalization", "with_normalization", "with_normalization_smote"];

pub fn preprocessing_settings(base: &PipelineSettings) -> Vec<(String, PipelineSettings)> {
    PREPROCESSING_VARIANTS
        .iter()
        .zip([(false, false), (true, false), (true, true)])
        .map(|(name, (normalize, smote))| (name.to_string(), PipelineSettings { normalize, smote, ..base.clone() }))
        .collect()
}

pub fn window_settings(base: &PipelineSettings, days: &[u32]) -> Vec<(String, PipelineSettings)> {
    days.iter()
        .map(|&d| (format!("{d}d"), PipelineSettings { lookback_days: f64::from(d), ..base.clone() }))
        .collect()
}

/// Run the configured pipeline and its enabled studies. Variants whose
/// settings equal the main run reuse its predictions.
pub fn run_studies(records: &[TransactionRecord], config: &PipelineConfig, threads: usize) -> Result<StudyRuns> {
    let base = &config.pipeline;
    let main_data = prepare(records, base)?;
    let main = cross_validate(&main_data, base, threads)?;
    let mut variant = |(name, settings): (String, PipelineSettings)| -> Result<VariantRun> {
        let run = if settings == *base {
            main.clone()
        } else if settings.lookback_days == base.lookback_days {
            cross_validate(&main_data, &settings, threads)?
        } else {
            cross_validate(&prepare(records, &settings)?, &settings, threads)?
        };
        Ok(VariantRun { name, settings, run })
    };
    let preprocessing = if config.studies.preprocessing {
        preprocessing_settings(base).into_iter().map(&mut variant).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let time_windows = if config.studies.time_windows {
        window_settings(base, &config.studies.window_days).into_iter().map(&mut variant).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    Ok(StudyRuns { main, preprocessing, time_windows })
}
