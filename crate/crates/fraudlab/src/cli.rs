use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use fraudlab_core::datagen::generate_corpus;
use fraudlab_core::eval::{build_report, fit_full, prepare, score_table};
use fraudlab_core::preprocess::derive_table;

use crate::artifact::ModelArtifact;
use crate::config::{Overrides, PipelineConfig, WINDOW_DAYS};
use crate::dataset::{read_dataset, write_dataset, CSV_FILE};
use crate::digest::sha256_file;
use crate::error::{Error, Result};
use crate::report::{ablation_csv, regenerate, render_text, write_log_file, write_run, write_text, DatasetInfo};
use crate::run::{run_studies, thread_count};

pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const ARTIFACT_FILE: &str = "artifact.json";
pub const FINAL_FIT_LOG: &str = "final_fit_predictions.csv";
pub const FINAL_FIT_REPORT: &str = "final_fit.json";
pub const EVALUATION_LOG: &str = "evaluation_predictions.csv";
pub const EVALUATION_REPORT: &str = "evaluation.json";

#[derive(Debug, Parser)]
#[command(name = "fraudlab", version, about = "Synthetic card-fraud corpus and mixture-of-experts detector")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (the run directory for `report`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Dataset CSV or JSON-lines file.
    #[arg(long, global = true, value_name = "PATH")]
    pub dataset: Option<PathBuf>,
    /// Model artifact written by `train`.
    #[arg(long, global = true, value_name = "PATH")]
    pub artifact: Option<PathBuf>,
    /// Train without SMOTE oversampling.
    #[arg(long, global = true)]
    pub no_smote: bool,
    /// Lookback of the sequence windows, in days.
    #[arg(long, global = true, value_parser = parse_window_days)]
    pub window_days: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset, its JSON-lines mirror and a manifest.
    Generate,
    /// Cross-validate, fit the final model and write the run directory.
    Train,
    /// Score a dataset with a saved artifact.
    Evaluate,
    /// Cross-validate and print the expert-removal table.
    Ablate,
    /// Rebuild the report files of a run directory from its logs.
    Report,
}

fn parse_window_days(s: &str) -> std::result::Result<u32, String> {
    match s.parse::<u32>() {
        Ok(d) if WINDOW_DAYS.contains(&d) => Ok(d),
        _ => Err(format!("expected one of {WINDOW_DAYS:?}")),
    }
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| Error::Config(format!("{flag} is required for this command")))
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        output_dir: cli.out.clone(),
        no_smote: cli.no_smote,
        window_days: cli.window_days,
    })?;
    Ok(cfg)
}

fn dataset_info(path: &Path, rows: usize) -> Result<DatasetInfo> {
    Ok(DatasetInfo { path: path.to_path_buf(), sha256: sha256_file(path)?, rows })
}

/// Run one command, writing human-readable output to stdout.
pub fn run(cli: &Cli) -> Result<()> {
    match cli.command {
        Command::Generate => generate(cli),
        Command::Train => train(cli),
        Command::Evaluate => evaluate(cli),
        Command::Ablate => ablate(cli),
        Command::Report => {
            let (_, text) = regenerate(require(&cli.out, "--out")?)?;
            print!("{text}");
            Ok(())
        }
    }
}

fn generate(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let dir = cfg.output_dir()?;
    let corpus = generate_corpus(&cfg.generator, cfg.seed)?;
    let m = write_dataset(dir, &corpus, &cfg.generator, cfg.seed)?;
    write_text(&dir.join(CONFIG_SNAPSHOT), &cfg.to_toml_string()?)?;
    println!("wrote {} rows ({} accounts, {:.1} days) to {}", m.rows, m.accounts, m.horizon_days, dir.join(CSV_FILE).display());
    println!("fraud rate {:.4} ({} rows)", m.realized_fraud_rate, m.fraud_count);
    for (kind, share) in &m.typology_shares {
        println!("  {kind:<20} {:>6.2}%  ({})", 100.0 * share, m.typology_counts[kind]);
    }
    Ok(())
}

fn train(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let dir = cfg.output_dir()?;
    let path = require(&cli.dataset, "--dataset")?;
    let records = read_dataset(path)?;
    let threads = thread_count()?;
    eprintln!("cross-validating {} rows over {} folds on {threads} threads", records.len(), cfg.pipeline.k_folds);
    let runs = run_studies(&records, &cfg, threads)?;
    write_run(dir, &cfg, dataset_info(path, records.len())?, &runs)?;
    write_text(&dir.join(CONFIG_SNAPSHOT), &cfg.to_toml_string()?)?;

    eprintln!("fitting the final model on every row");
    let data = prepare(&records, &cfg.pipeline)?;
    let (model, preds) = fit_full(&data, &cfg.pipeline)?;
    write_log_file(&dir.join(FINAL_FIT_LOG), &preds)?;
    let in_sample = build_report(&preds, cfg.pipeline.decision_threshold, &[], &[])?;
    crate::write_json(&dir.join(FINAL_FIT_REPORT), &in_sample)?;
    ModelArtifact::from_model(&model, &cfg, records.len())?.save(&dir.join(ARTIFACT_FILE))?;

    let (_, text) = regenerate(dir)?;
    print!("{text}");
    Ok(())
}

fn evaluate(cli: &Cli) -> Result<()> {
    let artifact = ModelArtifact::load(require(&cli.artifact, "--artifact")?)?;
    let records = read_dataset(require(&cli.dataset, "--dataset")?)?;
    let model = artifact.to_model()?;
    let settings = &artifact.config.pipeline;
    let table = derive_table(&records, settings.lookback_hours(), settings.entropy_window)?;
    let preds = score_table(&model, &table, settings)?;
    let report = build_report(&preds, settings.decision_threshold, &[], &[])?;
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
        write_log_file(&dir.join(EVALUATION_LOG), &preds)?;
        crate::write_json(&dir.join(EVALUATION_REPORT), &report)?;
    }
    print!("{}", render_text(&report, None));
    Ok(())
}

fn ablate(cli: &Cli) -> Result<()> {
    let mut cfg = load_config(cli)?;
    cfg.studies.preprocessing = false;
    cfg.studies.time_windows = false;
    let path = require(&cli.dataset, "--dataset")?;
    let records = read_dataset(path)?;
    let runs = run_studies(&records, &cfg, thread_count()?)?;
    let report = match &cfg.output_dir {
        Some(dir) => {
            write_run(dir, &cfg, dataset_info(path, records.len())?, &runs)?;
            regenerate(dir)?.0
        }
        None => build_report(&runs.main.predictions, cfg.pipeline.decision_threshold, &[], &[])?,
    };
    print!("{}", ablation_csv(&report));
    Ok(())
}
