use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ThresholdCalibration {
    /// Rows with error strictly above `tau` are flagged.
    pub tau: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// Area under the precision-recall curve of the error ranking.
    pub pr_auc: f64,
    /// Every error was identical, so no threshold separates anything.
    pub degenerate: bool,
}

/// Choose the reconstruction-error threshold with the best F1.
///
/// Candidates are the distinct observed errors `c`, each flagging the rows
/// with error `>= c`. The returned `tau` sits halfway between the winning
/// candidate and the next smaller observed error, so `error > tau` flags
/// exactly the same rows. F1 ties go to the larger candidate.
pub fn calibrate_anomaly_threshold(errors: &[f64], labels: &[bool]) -> Result<ThresholdCalibration> {
    if errors.len() != labels.len() {
        return Err(Error::LengthMismatch(errors.len(), labels.len()));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFiniteValue);
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..errors.len()).collect();
    order.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]));

    let p = positives as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut pr_auc = 0.0;
    let mut best: Option<(f64, usize, f64, f64, f64)> = None;
    let mut i = 0;
    while i < order.len() {
        let c = errors[order[i]];
        while i < order.len() && errors[order[i]] == c {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / p;
        pr_auc += (recall - prev_recall) * precision;
        prev_recall = recall;
        let f1 = if tp == 0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        if best.is_none_or(|b| f1 > b.0) {
            best = Some((f1, i, c, precision, recall));
        }
    }
    let (f1, end, c, precision, recall) = best.ok_or(Error::Empty("errors"))?;
    let degenerate = errors.iter().all(|&e| e == errors[0]);
    let tau = if degenerate {
        c
    } else if end < order.len() {
        0.5 * (c + errors[order[end]])
    } else {
        0.5 * c
    };
    Ok(ThresholdCalibration { tau, f1, precision, recall, pr_auc, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use rand::Rng as _;

    #[test]
    fn separable_pair_gives_midpoint() {
        let c = calibrate_anomaly_threshold(&[0.1, 0.9], &[false, true]).unwrap();
        assert_eq!(c.tau, 0.5);
        assert_eq!(c.f1, 1.0);
        assert_eq!(c.pr_auc, 1.0);
        assert!(!c.degenerate);
    }

    #[test]
    fn equal_errors_are_degenerate() {
        let c = calibrate_anomaly_threshold(&[0.3; 4], &[false, true, false, false]).unwrap();
        assert_eq!(c.tau, 0.3);
        assert!(c.degenerate);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(calibrate_anomaly_threshold(&[0.1, 0.2], &[false, false]), Err(Error::SingleClass)));
    }

    fn f1_at(errors: &[f64], labels: &[bool], tau: f64) -> f64 {
        let tp = errors.iter().zip(labels).filter(|(e, l)| **e > tau && **l).count() as f64;
        let fp = errors.iter().zip(labels).filter(|(e, l)| **e > tau && !**l).count() as f64;
        let fnn = errors.iter().zip(labels).filter(|(e, l)| **e <= tau && **l).count() as f64;
        if tp == 0.0 {
            0.0
        } else {
            2.0 * tp / (2.0 * tp + fp + fnn)
        }
    }

    #[test]
    fn matches_brute_force_sweep() {
        let mut r = rng(17);
        let labels: Vec<bool> = (0..200).map(|_| r.random_bool(0.2)).collect();
        // coarse grid so that ties occur
        let errors: Vec<f64> =
            labels.iter().map(|&l| (r.random_range(0..40) + if l { 15 } else { 0 }) as f64 / 50.0).collect();
        let c = calibrate_anomaly_threshold(&errors, &labels).unwrap();

        let mut distinct = errors.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let mut best_f1 = -1.0;
        let mut best_c = 0.0;
        for &cand in distinct.iter().rev() {
            let flagged: Vec<bool> = errors.iter().map(|&e| e >= cand).collect();
            let tp = flagged.iter().zip(&labels).filter(|(f, l)| **f && **l).count() as f64;
            let fp = flagged.iter().zip(&labels).filter(|(f, l)| **f && !**l).count() as f64;
            let fnn = flagged.iter().zip(&labels).filter(|(f, l)| !**f && **l).count() as f64;
            let f1 = 2.0 * tp / (2.0 * tp + fp + fnn);
            if f1 > best_f1 {
                best_f1 = f1;
                best_c = cand;
            }
        }
        let below = distinct.iter().rev().find(|&&v| v < best_c).copied().unwrap_or(0.0);
        assert_eq!(c.tau, 0.5 * (best_c + below));
        assert!((c.f1 - best_f1).abs() < 1e-12);
        assert!((f1_at(&errors, &labels, c.tau) - best_f1).abs() < 1e-12);
    }
}
