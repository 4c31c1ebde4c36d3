//! Run-directory layout, per-row prediction logs and the report bundle.
//!
//! A run directory holds `run.json`, the main prediction log and one log
//! per study variant. [`regenerate`] rebuilds `report.json`, `report.txt`,
//! `activation.csv` and `ablation.csv` from those files alone, so the
//! report is a pure function of the directory.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use fraudlab_core::datagen::{FraudType, Label, TransactionType};
use fraudlab_core::eval::{build_report, MetricsReport, ModelSummary, PredictionRecord, Summary, VariantRow};
use fraudlab_core::moe::{ActivationRow, EXPERT_COUNT};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::run::{FoldSummary, StudyRuns};

pub const RUN_FILE: &str = "run.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const PREPROCESSING_FILE: &str = "preprocessing_manifest.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";
pub const ACTIVATION_FILE: &str = "activation.csv";
pub const ABLATION_FILE: &str = "ablation.csv";

const LOG_HEADER: [&str; 20] = [
    "row",
    "fold",
    "label",
    "fraud_type",
    "transaction_type",
    "y",
    "g_lstm",
    "g_transformer",
    "g_autoencoder",
    "e_lstm",
    "e_transformer",
    "e_autoencoder",
    "ae_error",
    "ae_tau",
    "ablation_lstm",
    "ablation_transformer",
    "ablation_autoencoder",
    "g_unregularized_lstm",
    "g_unregularized_transformer",
    "g_unregularized_autoencoder",
];

/// Shortest text that parses back to the same `f64`.
fn exact(v: f64) -> String {
    format!("{v:?}")
}

fn triple(v: Option<[f64; EXPERT_COUNT]>) -> [String; EXPERT_COUNT] {
    v.map_or_else(Default::default, |a| a.map(exact))
}

pub fn write_prediction_log<W: Write>(records: &[PredictionRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_HEADER).map_err(Error::data)?;
    for r in records {
        let label = if r.label { Label::Fraud } else { Label::Legit };
        let mut row = vec![
            r.row.to_string(),
            r.fold.to_string(),
            label.to_string(),
            r.fraud_type.to_string(),
            r.transaction_type.to_string(),
            exact(r.y),
        ];
        row.extend(r.g.map(exact));
        row.extend(r.expert_outputs.map(exact));
        row.push(exact(r.ae_error));
        row.push(exact(r.ae_tau));
        row.extend(triple(r.ablation_y));
        row.extend(triple(r.g_unregularized));
        w.write_record(&row).map_err(Error::data)?;
    }
    w.flush().map_err(Error::data)
}

fn field<T: std::str::FromStr>(line: usize, name: &str, text: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    text.parse().map_err(|e| Error::Data(format!("prediction log line {line}, `{name}`: `{text}`: {e}")))
}

fn read_triple(line: usize, rec: &csv::StringRecord, start: usize) -> Result<Option<[f64; EXPERT_COUNT]>> {
    let cells = [&rec[start], &rec[start + 1], &rec[start + 2]];
    if cells.iter().all(|c| c.is_empty()) {
        return Ok(None);
    }
    let mut out = [0.0; EXPERT_COUNT];
    for (o, (c, name)) in out.iter_mut().zip(cells.iter().zip(&LOG_HEADER[start..start + 3])) {
        *o = field(line, name, c)?;
    }
    Ok(Some(out))
}

pub fn read_prediction_log<R: Read>(input: R) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let head = rdr.headers().map_err(Error::data)?;
    if head.iter().ne(LOG_HEADER) {
        return Err(Error::Data(format!("prediction log header mismatch: `{}`", head.iter().collect::<Vec<_>>().join(","))));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Data(format!("prediction log line {line}: {e}")))?;
        let f = |j: usize| -> Result<f64> { field(line, LOG_HEADER[j], &rec[j]) };
        out.push(PredictionRecord {
            row: field(line, "row", &rec[0])?,
            fold: field(line, "fold", &rec[1])?,
            label: field::<Label>(line, "label", &rec[2])?.is_fraud(),
            fraud_type: field::<FraudType>(line, "fraud_type", &rec[3])?,
            transaction_type: field::<TransactionType>(line, "transaction_type", &rec[4])?,
            y: f(5)?,
            g: [f(6)?, f(7)?, f(8)?],
            expert_outputs: [f(9)?, f(10)?, f(11)?],
            ae_error: f(12)?,
            ae_tau: f(13)?,
            ablation_y: read_triple(line, &rec, 14)?,
            g_unregularized: read_triple(line, &rec, 17)?,
        });
    }
    Ok(out)
}

pub fn write_log_file(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let file = File::create(path).map_err(Error::io(path))?;
    write_prediction_log(records, BufWriter::new(file))
}

pub fn read_log_file(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = File::open(path).map_err(Error::io(path))?;
    read_prediction_log(BufReader::new(file)).map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// A study variant and the log file (relative to the run directory)
/// holding its predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRef {
    pub name: String,
    pub file: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: PathBuf,
    pub sha256: String,
    pub rows: usize,
}

/// Contents of `run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: PipelineConfig,
    pub dataset: DatasetInfo,
    pub threshold: f64,
    pub predictions: PathBuf,
    pub preprocessing: Vec<LogRef>,
    pub time_windows: Vec<LogRef>,
}

/// Fold assignment and the state fitted in each fold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessingManifest {
    pub k_folds: usize,
    /// Fold of each dataset row.
    pub assignment: Vec<usize>,
    pub folds: Vec<FoldSummary>,
}

/// Write the logs, `run.json` and `preprocessing_manifest.json` of a study.
pub fn write_run(dir: &Path, config: &PipelineConfig, dataset: DatasetInfo, runs: &StudyRuns) -> Result<RunManifest> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    write_log_file(&dir.join(PREDICTIONS_FILE), &runs.main.predictions)?;
    let refs = |study: &str, variants: &[crate::run::VariantRun]| -> Result<Vec<LogRef>> {
        variants
            .iter()
            .map(|v| {
                let file = PathBuf::from("variants").join(format!("{study}_{}.csv", v.name));
                write_log_file(&dir.join(&file), &v.run.predictions)?;
                Ok(LogRef { name: v.name.clone(), file })
            })
            .collect()
    };
    let manifest = RunManifest {
        config: config.clone(),
        dataset,
        threshold: config.pipeline.decision_threshold,
        predictions: PathBuf::from(PREDICTIONS_FILE),
        preprocessing: refs("preprocessing", &runs.preprocessing)?,
        time_windows: refs("window", &runs.time_windows)?,
    };
    crate::write_json(&dir.join(RUN_FILE), &manifest)?;
    let prep = PreprocessingManifest {
        k_folds: config.pipeline.k_folds,
        assignment: runs.main.assignment.clone(),
        folds: runs.main.folds.clone(),
    };
    crate::write_json(&dir.join(PREPROCESSING_FILE), &prep)?;
    Ok(manifest)
}

/// Rebuild every report file of a run directory from its logs.
pub fn regenerate(dir: &Path) -> Result<(MetricsReport, String)> {
    let manifest: RunManifest = crate::read_json(&dir.join(RUN_FILE))?;
    let main = read_log_file(&dir.join(&manifest.predictions))?;
    let load = |refs: &[LogRef]| -> Result<Vec<(String, Vec<PredictionRecord>)>> {
        refs.iter().map(|r| Ok((r.name.clone(), read_log_file(&dir.join(&r.file))?))).collect()
    };
    let report = build_report(&main, manifest.threshold, &load(&manifest.preprocessing)?, &load(&manifest.time_windows)?)
        .map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
    let folds = crate::read_json::<PreprocessingManifest>(&dir.join(PREPROCESSING_FILE)).ok().map(|p| p.folds);
    let text = render_text(&report, folds.as_deref());
    crate::write_json(&dir.join(REPORT_JSON), &report)?;
    write_text(&dir.join(REPORT_TEXT), &text)?;
    write_text(&dir.join(ACTIVATION_FILE), &activation_csv(&report.activation.by_fraud_type))?;
    write_text(&dir.join(ABLATION_FILE), &ablation_csv(&report))?;
    Ok((report, text))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(Error::io(path))
}

/// Plot data: mean gate weights per fraud type.
pub fn activation_csv(rows: &[ActivationRow]) -> String {
    let mut s = String::from("fraud_type,w_rnn,w_transformer,w_autoencoder,n\n");
    for r in rows {
        let w = triple(r.mean);
        let _ = writeln!(s, "{},{},{},{},{}", r.group, w[0], w[1], w[2], r.n);
    }
    s
}

pub fn ablation_csv(report: &MetricsReport) -> String {
    let mut s = String::from(
        "removed,accuracy,precision,recall,f1,auc_roc,delta_accuracy,delta_precision,delta_recall,delta_f1,\
         delta_auc_roc,structural_recall_full,structural_recall_ablated,structural_recall_drop,structural_count\n",
    );
    for a in &report.ablation {
        let m = &a.summary;
        let vals = [
            m.accuracy.mean,
            m.precision.mean,
            m.recall.mean,
            m.f1.mean,
            m.auc_roc.mean,
            a.delta_accuracy,
            a.delta_precision,
            a.delta_recall,
            a.delta_f1,
            a.delta_auc_roc,
            a.structural_recall_full,
            a.structural_recall_ablated,
            a.structural_recall_drop,
        ];
        let cells: Vec<String> = vals.iter().map(|v| exact(*v)).collect();
        let _ = writeln!(s, "{},{},{}", a.removed, cells.join(","), a.structural_count);
    }
    s
}

fn pct(s: &Summary) -> String {
    if s.mean.is_nan() {
        "n/a".into()
    } else {
        format!("{:.1} ± {:.1}", 100.0 * s.mean, 100.0 * s.sd)
    }
}

fn ratio(s: &Summary) -> String {
    if s.mean.is_nan() {
        "n/a".into()
    } else {
        format!("{:.3} ± {:.3}", s.mean, s.sd)
    }
}

fn opt_pct(v: f64) -> String {
    if v.is_nan() {
        "n/a".into()
    } else {
        format!("{:.1}", 100.0 * v)
    }
}

fn table(out: &mut String, title: &str, headers: &[&str], rows: &[Vec<String>]) {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", line(headers.to_vec()));
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    for r in rows {
        let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
    }
    out.push('\n');
}

fn reference(name: &str, values: &[&str]) -> Vec<String> {
    std::iter::once(format!("published reference: {name}")).chain(values.iter().map(|v| v.to_string())).collect()
}

fn summary_cells(m: &ModelSummary) -> Vec<String> {
    vec![pct(&m.accuracy), pct(&m.precision), pct(&m.recall), pct(&m.f1), ratio(&m.auc_roc)]
}

fn variant_rows(rows: &[VariantRow]) -> Vec<Vec<String>> {
    rows.iter().map(|v| std::iter::once(v.name.clone()).chain(summary_cells(&v.summary)).collect()).collect()
}

/// Human-readable tables mirroring the published comparison tables, each
/// followed by the published values for reference.
pub fn render_text(report: &MetricsReport, folds: Option<&[FoldSummary]>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} rows, {} positives, {} folds, decision threshold {}\n",
        report.rows, report.positives, report.folds, report.threshold
    );

    let mut rows: Vec<Vec<String>> = report
        .models
        .iter()
        .map(|m| {
            let mut r = vec![m.name.clone()];
            r.extend(summary_cells(m));
            r.push(ratio(&m.average_precision));
            r.push(if m.name == "moe" { pct(&report.anomaly_detection_rate) } else { "n/a".into() });
            r
        })
        .collect();
    let mut ae = vec!["autoencoder".to_string()];
    ae.extend(std::iter::repeat_n("n/a".to_string(), 6));
    ae.push(pct(&report.anomaly_detection_rate));
    rows.push(ae);
    rows.push(reference("Model of Expert", &["98.7", "94.3", "91.5", "92.9", "0.978", "n/a", "93.4"]));
    rows.push(reference("Transformer", &["96.2", "90.8", "87.4", "89.0", "0.950", "n/a", "n/a"]));
    rows.push(reference("RNN (LSTM)", &["95.8", "89.5", "85.6", "87.5", "0.945", "n/a", "n/a"]));
    rows.push(reference("Autoencoder", &["n/a", "n/a", "n/a", "n/a", "n/a", "n/a", "88.7"]));
    table(
        &mut out,
        "Model comparison (%, mean ± sd over folds)",
        &["model", "accuracy", "precision", "recall", "f1", "auc_roc", "avg_precision", "anomaly_detection"],
        &rows,
    );

    let best: Vec<Vec<String>> = report
        .models
        .iter()
        .map(|m| vec![m.name.clone(), ratio(&m.best_threshold), pct(&m.best_f1), m.precision_undefined_folds.to_string()])
        .collect();
    table(&mut out, "Best-F1 operating points", &["model", "threshold", "f1", "folds_without_alarms"], &best);

    if !report.preprocessing.is_empty() {
        let mut rows = variant_rows(&report.preprocessing);
        rows.push(reference("Without Normalization", &["95.1", "88.2", "84.0", "86.0", "0.940"]));
        rows.push(reference("With Normalization", &["96.5", "91.0", "88.0", "89.4", "0.955"]));
        rows.push(reference("With SMOTE", &["98.7", "94.3", "91.5", "92.9", "0.978"]));
        table(&mut out, "Preprocessing comparison (%)", &["variant", "accuracy", "precision", "recall", "f1", "auc_roc"], &rows);
    }

    let mut rows: Vec<Vec<String>> = report
        .transaction_types
        .iter()
        .map(|g| {
            let mut r = vec![g.group.clone(), g.n.to_string(), g.positives.to_string()];
            match &g.metrics {
                Some(m) => r.extend([m.accuracy, m.precision, m.recall, m.f1].map(opt_pct)),
                None => r.extend(std::iter::repeat_n("n/a".to_string(), 4)),
            }
            r
        })
        .collect();
    rows.push(reference("Purchase", &["", "", "97.2", "92.0", "89.8", "90.9"]));
    rows.push(reference("Cash Withdrawal", &["", "", "98.0", "94.5", "92.1", "93.3"]));
    rows.push(reference("Online Payment", &["", "", "96.5", "90.4", "87.0", "88.7"]));
    table(
        &mut out,
        "Performance by transaction type (%, pooled over folds)",
        &["transaction_type", "n", "positives", "accuracy", "precision", "recall", "f1"],
        &rows,
    );

    if !report.time_windows.is_empty() {
        let mut rows = variant_rows(&report.time_windows);
        rows.push(reference("7 days", &["95.8", "91.5", "87.0", "89.2", "n/a"]));
        rows.push(reference("15 days", &["97.0", "92.8", "89.7", "91.2", "n/a"]));
        rows.push(reference("30 days", &["98.7", "94.3", "91.5", "92.9", "n/a"]));
        table(&mut out, "Lookback window comparison (%)", &["window", "accuracy", "precision", "recall", "f1", "auc_roc"], &rows);
    }

    let a = &report.activation;
    let act = |r: &ActivationRow| -> Vec<String> {
        let w = r.mean.unwrap_or([f64::NAN; EXPERT_COUNT]);
        vec![r.group.clone(), r.n.to_string(), opt_pct(w[0]), opt_pct(w[1]), opt_pct(w[2])]
    };
    let mut rows: Vec<Vec<String>> = std::iter::once(&a.overall).chain(&a.by_class).chain(&a.by_fraud_type).map(act).collect();
    rows.push(reference("component shares", &["", "30", "40", "30"]));
    table(&mut out, "Mean gate weights (%)", &["group", "n", "w_rnn", "w_transformer", "w_autoencoder"], &rows);

    if !report.ablation.is_empty() {
        let rows: Vec<Vec<String>> = report
            .ablation
            .iter()
            .map(|r| {
                let mut c = vec![format!("without {}", r.removed)];
                c.extend([r.delta_accuracy, r.delta_precision, r.delta_recall, r.delta_f1].map(|v| format!("{:+.1}", 100.0 * v)));
                c.push(format!("{:+.3}", r.delta_auc_roc));
                c.push(opt_pct(r.structural_recall_full));
                c.push(opt_pct(r.structural_recall_ablated));
                c.push(r.structural_count.to_string());
                c
            })
            .collect();
        table(
            &mut out,
            "Ablation: gate retrained without one expert (deltas vs full mixture, pct points)",
            &["variant", "d_accuracy", "d_precision", "d_recall", "d_f1", "d_auc_roc", "structural_recall_full", "structural_recall_ablated", "structural_n"],
            &rows,
        );
    }

    if let Some(e) = &report.entropy {
        let _ = writeln!(
            out,
            "Mean gate entropy: {:.4} with the entropy term, {:.4} without\n",
            e.mean_entropy, e.mean_entropy_unregularized
        );
    }
    let c = &report.complementarity;
    let _ = writeln!(out, "Rows every standalone detector misclassifies but the mixture gets right: {} of {}", c.count, c.total);
    for e in &c.exemplars {
        let _ = writeln!(
            out,
            "  row {} (fold {}, {}): y {:.3}, g [{:.3}, {:.3}, {:.3}], experts [{:.3}, {:.3}, {:.3}]",
            e.row,
            e.fold,
            if e.label { "fraud" } else { "legit" },
            e.y,
            e.g[0],
            e.g[1],
            e.g[2],
            e.expert_outputs[0],
            e.expert_outputs[1],
            e.expert_outputs[2]
        );
    }
    out.push('\n');

    if let Some(folds) = folds {
        let rows: Vec<Vec<String>> = folds
            .iter()
            .map(|f| {
                vec![
                    f.fold.to_string(),
                    f.train_rows.to_string(),
                    f.test_rows.to_string(),
                    f.synthetic_rows.to_string(),
                    format!("{:.6}", f.calibration.tau),
                    format!("{:?}", f.best_epochs),
                    if f.experts_before_gate == f.experts_after_gate { "unchanged".into() } else { "CHANGED".into() },
                ]
            })
            .collect();
        table(
            &mut out,
            "Folds (best epochs: lstm, transformer, autoencoder, gate)",
            &["fold", "train", "test", "smote", "ae_tau", "best_epochs", "experts_during_gate_training"],
            &rows,
        );
    }
    out
}
