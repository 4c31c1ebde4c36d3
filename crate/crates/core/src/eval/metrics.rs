use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Threshold metrics. A rate whose denominator is zero is reported as 0 and
/// flagged.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMetrics {
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub precision_undefined: bool,
    pub recall_undefined: bool,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Rows with `score >= threshold` are predicted positive.
pub fn confusion_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> Result<ConfusionMetrics> {
    let decisions: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
    decision_metrics(&decisions, labels)
}

pub fn decision_metrics(decisions: &[bool], labels: &[bool]) -> Result<ConfusionMetrics> {
    if decisions.len() != labels.len() {
        return Err(Error::LengthMismatch(decisions.len(), labels.len()));
    }
    if decisions.is_empty() {
        return Err(Error::Empty("scores"));
    }
    let mut c = ConfusionCounts::default();
    for (&d, &y) in decisions.iter().zip(labels) {
        match (d, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let (precision, precision_undefined) = ratio(c.tp, c.tp + c.fp);
    let (recall, recall_undefined) = ratio(c.tp, c.tp + c.fn_);
    Ok(ConfusionMetrics {
        counts: c,
        accuracy: (c.tp + c.tn) as f64 / c.total() as f64,
        precision,
        recall,
        f1: f1_score(precision, recall),
        precision_undefined,
        recall_undefined,
    })
}

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFiniteValue);
    }
    let pos = labels.iter().filter(|&&y| y).count();
    Ok((pos, labels.len() - pos))
}

/// Indices sorted by descending score, grouped into runs of equal score.
fn descending_groups(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if scores[g[0]] == scores[i] => g.push(i),
            _ => groups.push(alloc::vec![i]),
        }
    }
    groups
}

/// Area under the ROC curve as the Mann-Whitney statistic, using average
/// ranks for ties.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut groups = descending_groups(scores);
    groups.reverse();
    let mut rank_sum = 0.0;
    let mut next_rank = 1.0;
    for g in &groups {
        let avg = next_rank + (g.len() as f64 - 1.0) / 2.0;
        rank_sum += avg * g.iter().filter(|&&i| labels[i]).count() as f64;
        next_rank += g.len() as f64;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision `Σ (R_k − R_{k−1}) P_k` over descending-score
/// prefixes, each group of tied scores entering at once.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check_binary(scores, labels)?;
    if pos == 0 {
        return Err(Error::NoPositives);
    }
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for g in descending_groups(scores) {
        seen += g.len();
        tp += g.iter().filter(|&&i| labels[i]).count();
        let recall = tp as f64 / pos as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
    }
    Ok(ap)
}

/// Share of anomalous rows whose reconstruction error exceeds `tau`.
pub fn anomaly_detection_rate(errors: &[f64], anomalous: &[bool], tau: f64) -> Result<f64> {
    if errors.len() != anomalous.len() {
        return Err(Error::LengthMismatch(errors.len(), anomalous.len()));
    }
    let n = anomalous.iter().filter(|&&a| a).count();
    if n == 0 {
        return Err(Error::Empty("anomalous subset"));
    }
    let hit = errors.iter().zip(anomalous).filter(|(e, a)| **a && **e > tau).count();
    Ok(hit as f64 / n as f64)
}

/// Score threshold with the best F1 when flagging `score >= threshold`;
/// ties go to the higher threshold. Returns `(threshold, f1)`.
pub fn best_f1_threshold(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    let (pos, _) = check_binary(scores, labels)?;
    if pos == 0 {
        return Err(Error::NoPositives);
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = (f64::INFINITY, -1.0);
    for g in descending_groups(scores) {
        for &i in &g {
            if labels[i] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let f1 = 2.0 * tp as f64 / (2 * tp + fp + (pos - tp)) as f64;
        if f1 > best.1 {
            best = (scores[g[0]], f1);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation across folds (0 for a single fold).
    pub sd: f64,
    pub per_fold: Vec<f64>,
}

impl Summary {
    pub fn of(values: Vec<f64>) -> Summary {
        let n = values.len() as f64;
        if values.is_empty() {
            return Summary { mean: f64::NAN, sd: f64::NAN, per_fold: values };
        }
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() < 2 {
            0.0
        } else {
            crate::math::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
        };
        Summary { mean, sd, per_fold: values }
    }
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
