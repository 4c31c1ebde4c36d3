use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::log::PredictionRecord;
use super::metrics::{
    anomaly_detection_rate, average_precision, best_f1_threshold, confusion_metrics, decision_metrics, f1_score,
    roc_auc, ConfusionMetrics, Summary,
};
use crate::datagen::TransactionType;
use crate::error::{Error, Result};
use crate::experts::ExpertKind;
use crate::moe::{expert_activation_profile, gate_entropy, ActivationProfile, EXPERT_COUNT};

/// Cross-fold summary of one scoring rule. `f1.mean` is the harmonic mean
/// of `precision.mean` and `recall.mean`; `f1.per_fold` holds each fold's
/// own F1.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSummary {
    pub name: String,
    pub accuracy: Summary,
    pub precision: Summary,
    pub recall: Summary,
    pub f1: Summary,
    pub auc_roc: Summary,
    pub average_precision: Summary,
    /// Per-fold score threshold with the best F1, and that F1.
    pub best_threshold: Summary,
    pub best_f1: Summary,
    /// Folds where precision had no predicted positives.
    pub precision_undefined_folds: usize,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroupMetrics {
    pub group: String,
    pub n: usize,
    pub positives: usize,
    pub metrics: Option<ConfusionMetrics>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AblationRow {
    pub removed: ExpertKind,
    pub summary: ModelSummary,
    pub delta_accuracy: f64,
    pub delta_precision: f64,
    pub delta_recall: f64,
    pub delta_f1: f64,
    pub delta_auc_roc: f64,
    /// Recall on structural-outlier frauds, pooled over folds.
    pub structural_recall_full: f64,
    pub structural_recall_ablated: f64,
    /// `full - ablated`; positive when removing the expert loses detections.
    pub structural_recall_drop: f64,
    pub structural_count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EntropyComparison {
    pub mean_entropy: f64,
    pub mean_entropy_unregularized: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComplementCase {
    pub row: usize,
    pub fold: usize,
    pub label: bool,
    pub y: f64,
    pub g: [f64; EXPERT_COUNT],
    pub expert_outputs: [f64; EXPERT_COUNT],
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Complementarity {
    pub count: usize,
    pub total: usize,
    pub exemplars: Vec<ComplementCase>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariantRow {
    pub name: String,
    pub summary: ModelSummary,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub threshold: f64,
    pub folds: usize,
    pub rows: usize,
    pub positives: usize,
    /// Mixture, then the standalone LSTM and Transformer.
    pub models: Vec<ModelSummary>,
    /// Autoencoder detector recall on structural-outlier frauds.
    pub anomaly_detection_rate: Summary,
    pub transaction_types: Vec<GroupMetrics>,
    pub activation: ActivationProfile,
    pub ablation: Vec<AblationRow>,
    pub entropy: Option<EntropyComparison>,
    pub complementarity: Complementarity,
    pub preprocessing: Vec<VariantRow>,
    pub time_windows: Vec<VariantRow>,
}

impl MetricsReport {
    pub fn model(&self, name: &str) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.name == name)
    }
}

pub const MAX_EXEMPLARS: usize = 20;

fn by_fold(records: &[PredictionRecord]) -> BTreeMap<usize, Vec<&PredictionRecord>> {
    let mut m: BTreeMap<usize, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        m.entry(r.fold).or_default().push(r);
    }
    m
}

/// Summarise a scoring rule across folds.
pub fn summarize(
    name: &str,
    records: &[PredictionRecord],
    threshold: f64,
    score: impl Fn(&PredictionRecord) -> f64,
) -> Result<ModelSummary> {
    if records.is_empty() {
        return Err(Error::Empty("prediction log"));
    }
    let mut cols: [Vec<f64>; 8] = Default::default();
    let mut undefined = 0;
    for rows in by_fold(records).values() {
        let scores: Vec<f64> = rows.iter().map(|r| score(r)).collect();
        let labels: Vec<bool> = rows.iter().map(|r| r.label).collect();
        let m = confusion_metrics(&scores, &labels, threshold)?;
        undefined += usize::from(m.precision_undefined);
        let (t, bf1) = best_f1_threshold(&scores, &labels)?;
        let vals = [
            m.accuracy,
            m.precision,
            m.recall,
            m.f1,
            roc_auc(&scores, &labels)?,
            average_precision(&scores, &labels)?,
            t,
            bf1,
        ];
        for (c, v) in cols.iter_mut().zip(vals) {
            c.push(v);
        }
    }
    let [acc, prec, rec, f1, auc, ap, t, bf1] = cols;
    let (precision, recall) = (Summary::of(prec), Summary::of(rec));
    let mut f1 = Summary::of(f1);
    f1.mean = f1_score(precision.mean, recall.mean);
    Ok(ModelSummary {
        name: name.to_string(),
        accuracy: Summary::of(acc),
        precision,
        recall,
        f1,
        auc_roc: Summary::of(auc),
        average_precision: Summary::of(ap),
        best_threshold: Summary::of(t),
        best_f1: Summary::of(bf1),
        precision_undefined_folds: undefined,
    })
}

fn moe_summary(name: &str, records: &[PredictionRecord], threshold: f64) -> Result<ModelSummary> {
    summarize(name, records, threshold, |r| r.y)
}

/// Autoencoder detection rate per fold; folds without structural frauds
/// are skipped.
pub fn detection_rates(records: &[PredictionRecord]) -> Summary {
    let mut rates = Vec::new();
    for rows in by_fold(records).values() {
        let errors: Vec<f64> = rows.iter().map(|r| r.ae_error).collect();
        let anomalous: Vec<bool> = rows.iter().map(|r| r.is_structural()).collect();
        // one threshold per fold
        if let Ok(rate) = anomaly_detection_rate(&errors, &anomalous, rows[0].ae_tau) {
            rates.push(rate);
        }
    }
    Summary::of(rates)
}

fn structural_recall(records: &[PredictionRecord], threshold: f64, score: impl Fn(&PredictionRecord) -> f64) -> (f64, usize) {
    let subset: Vec<&PredictionRecord> = records.iter().filter(|r| r.is_structural() && r.label).collect();
    if subset.is_empty() {
        return (f64::NAN, 0);
    }
    let hit = subset.iter().filter(|r| score(r) >= threshold).count();
    (hit as f64 / subset.len() as f64, subset.len())
}

pub fn ablation_table(records: &[PredictionRecord], threshold: f64, full: &ModelSummary) -> Result<Vec<AblationRow>> {
    if records.iter().any(|r| r.ablation_y.is_none()) {
        return Ok(Vec::new());
    }
    let (full_struct, count) = structural_recall(records, threshold, |r| r.y);
    let mut rows = Vec::with_capacity(EXPERT_COUNT);
    for (j, kind) in ExpertKind::ALL.into_iter().enumerate() {
        let score = |r: &PredictionRecord| r.ablation_y.map_or(f64::NAN, |a| a[j]);
        let name = alloc::format!("without_{kind}");
        let summary = summarize(&name, records, threshold, score)?;
        let (ablated, _) = structural_recall(records, threshold, score);
        rows.push(AblationRow {
            removed: kind,
            delta_accuracy: summary.accuracy.mean - full.accuracy.mean,
            delta_precision: summary.precision.mean - full.precision.mean,
            delta_recall: summary.recall.mean - full.recall.mean,
            delta_f1: summary.f1.mean - full.f1.mean,
            delta_auc_roc: summary.auc_roc.mean - full.auc_roc.mean,
            structural_recall_full: full_struct,
            structural_recall_ablated: ablated,
            structural_recall_drop: full_struct - ablated,
            structural_count: count,
            summary,
        });
    }
    Ok(rows)
}

/// Rows every standalone detector gets wrong and the mixture gets right.
pub fn complementarity(records: &[PredictionRecord], threshold: f64) -> Complementarity {
    let mut exemplars = Vec::new();
    let mut count = 0;
    for r in records {
        let wrong = |flag: bool| flag != r.label;
        let experts_wrong = wrong(r.expert_outputs[0] >= threshold)
            && wrong(r.expert_outputs[1] >= threshold)
            && wrong(r.ae_flag());
        if experts_wrong && !wrong(r.y >= threshold) {
            count += 1;
            if exemplars.len() < MAX_EXEMPLARS {
                exemplars.push(ComplementCase {
                    row: r.row,
                    fold: r.fold,
                    label: r.label,
                    y: r.y,
                    g: r.g,
                    expert_outputs: r.expert_outputs,
                });
            }
        }
    }
    Complementarity { count, total: records.len(), exemplars }
}

pub fn transaction_type_table(records: &[PredictionRecord], threshold: f64) -> Vec<GroupMetrics> {
    TransactionType::ALL
        .iter()
        .map(|&t| {
            let rows: Vec<&PredictionRecord> = records.iter().filter(|r| r.transaction_type == t).collect();
            let decisions: Vec<bool> = rows.iter().map(|r| r.y >= threshold).collect();
            let labels: Vec<bool> = rows.iter().map(|r| r.label).collect();
            GroupMetrics {
                group: t.as_str().to_string(),
                n: rows.len(),
                positives: labels.iter().filter(|&&l| l).count(),
                metrics: decision_metrics(&decisions, &labels).ok(),
            }
        })
        .collect()
}

pub fn entropy_comparison(records: &[PredictionRecord]) -> Option<EntropyComparison> {
    if records.is_empty() {
        return None;
    }
    let n = records.len() as f64;
    let mut unreg = 0.0;
    for r in records {
        unreg += gate_entropy(&r.g_unregularized?);
    }
    Some(EntropyComparison {
        mean_entropy: records.iter().map(|r| gate_entropy(&r.g)).sum::<f64>() / n,
        mean_entropy_unregularized: unreg / n,
    })
}

/// Build every table from prediction logs: the main run plus optional
/// preprocessing and time-window variant runs, each named.
pub fn build_report(
    records: &[PredictionRecord],
    threshold: f64,
    preprocessing: &[(String, Vec<PredictionRecord>)],
    time_windows: &[(String, Vec<PredictionRecord>)],
) -> Result<MetricsReport> {
    let moe = moe_summary("moe", records, threshold)?;
    let lstm = summarize("lstm", records, threshold, |r| r.expert_outputs[0])?;
    let transformer = summarize("transformer", records, threshold, |r| r.expert_outputs[1])?;
    let gates: Vec<[f64; EXPERT_COUNT]> = records.iter().map(|r| r.g).collect();
    let types: Vec<_> = records.iter().map(|r| r.fraud_type).collect();
    let labels: Vec<bool> = records.iter().map(|r| r.label).collect();
    let variants = |list: &[(String, Vec<PredictionRecord>)]| -> Result<Vec<VariantRow>> {
        list.iter().map(|(name, log)| Ok(VariantRow { name: name.clone(), summary: moe_summary(name, log, threshold)? })).collect()
    };
    Ok(MetricsReport {
        threshold,
        folds: by_fold(records).len(),
        rows: records.len(),
        positives: labels.iter().filter(|&&l| l).count(),
        anomaly_detection_rate: detection_rates(records),
        transaction_types: transaction_type_table(records, threshold),
        activation: expert_activation_profile(&gates, &types, &labels)?,
        ablation: ablation_table(records, threshold, &moe)?,
        entropy: entropy_comparison(records),
        complementarity: complementarity(records, threshold),
        preprocessing: variants(preprocessing)?,
        time_windows: variants(time_windows)?,
        models: alloc::vec![moe, lstm, transformer],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::FraudType;
    use alloc::vec;

    fn rec(row: usize, fold: usize, label: bool, y: f64, e: [f64; 3], ae_error: f64) -> PredictionRecord {
        PredictionRecord {
            row,
            fold,
            label,
            fraud_type: if label { FraudType::Other } else { FraudType::None },
            transaction_type: TransactionType::Purchase,
            y,
            g: [0.4, 0.3, 0.3],
            expert_outputs: e,
            ae_error,
            ae_tau: 1.0,
            ablation_y: Some([y, y, y]),
            g_unregularized: Some([1.0, 0.0, 0.0]),
        }
    }

    #[test]
    fn complementarity_definition() {
        let rows = vec![
            rec(0, 0, true, 0.8, [0.1, 0.2, 0.0], 0.5),  // all experts miss, mixture right
            rec(1, 0, true, 0.3, [0.1, 0.2, 0.0], 0.5),  // mixture wrong
            rec(2, 0, false, 0.1, [0.9, 0.7, 1.0], 2.0), // all experts false-alarm, mixture right
            rec(3, 0, true, 0.9, [0.9, 0.2, 0.0], 0.5),  // one expert right
        ];
        let c = complementarity(&rows, 0.5);
        assert_eq!(c.count, 2);
        assert_eq!(c.exemplars.iter().map(|e| e.row).collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn aggregate_is_the_mean_of_folds_and_f1_is_harmonic() {
        let mut rows = Vec::new();
        for fold in 0..3 {
            for i in 0..20 {
                let label = i % 4 == 0;
                let y = ((i * 7 + fold * 3) % 10) as f64 / 10.0;
                rows.push(rec(fold * 20 + i, fold, label, y, [y, 1.0 - y, 0.0], y));
            }
        }
        let report = build_report(&rows, 0.5, &[], &[]).unwrap();
        let moe = report.model("moe").unwrap();
        let mean: f64 = moe.accuracy.per_fold.iter().sum::<f64>() / 3.0;
        assert!((moe.accuracy.mean - mean).abs() < 1e-12);
        let (p, r) = (moe.precision.mean, moe.recall.mean);
        assert!((moe.f1.mean - 2.0 * p * r / (p + r)).abs() < 1e-9);
        assert_eq!(report.ablation.len(), 3);
        assert!(report.ablation.iter().all(|a| a.delta_f1 == 0.0 && a.structural_recall_drop == 0.0));
        let e = report.entropy.unwrap();
        assert_eq!(e.mean_entropy_unregularized, 0.0);
        assert_eq!(report.rows, 60);
    }
}
