use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::gate::EXPERT_COUNT;
use crate::datagen::FraudType;
use crate::error::{Error, Result};

/// Mean gate weights over one group of rows. `mean` is `None` for an
/// empty group.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActivationRow {
    pub group: String,
    pub mean: Option<[f64; EXPERT_COUNT]>,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActivationProfile {
    /// One row per fraud typology, followed by `None` (legitimate rows).
    pub by_fraud_type: Vec<ActivationRow>,
    /// `legit` then `fraud`.
    pub by_class: Vec<ActivationRow>,
    pub overall: ActivationRow,
}

fn mean_row(group: &str, gates: &[[f64; EXPERT_COUNT]], pick: impl Fn(usize) -> bool) -> ActivationRow {
    let mut sum = [0.0; EXPERT_COUNT];
    let mut n = 0;
    for (i, g) in gates.iter().enumerate() {
        if pick(i) {
            for j in 0..EXPERT_COUNT {
                sum[j] += g[j];
            }
            n += 1;
        }
    }
    let mean = (n > 0).then(|| sum.map(|s| s / n as f64));
    ActivationRow { group: group.to_string(), mean, n }
}

/// Average gate weights per fraud type, per class and overall.
pub fn expert_activation_profile(
    gates: &[[f64; EXPERT_COUNT]],
    fraud_types: &[FraudType],
    labels: &[bool],
) -> Result<ActivationProfile> {
    if gates.len() != fraud_types.len() {
        return Err(Error::LengthMismatch(gates.len(), fraud_types.len()));
    }
    if gates.len() != labels.len() {
        return Err(Error::LengthMismatch(gates.len(), labels.len()));
    }
    let by_fraud_type = FraudType::TYPOLOGIES
        .iter()
        .chain(core::iter::once(&FraudType::None))
        .map(|&t| mean_row(t.as_str(), gates, |i| fraud_types[i] == t))
        .collect();
    let by_class =
        alloc::vec![mean_row("legit", gates, |i| !labels[i]), mean_row("fraud", gates, |i| labels[i])];
    Ok(ActivationProfile { by_fraud_type, by_class, overall: mean_row("all", gates, |_| true) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng;
    use rand::Rng as _;

    #[test]
    fn single_row_profile_is_that_row() {
        let p = expert_activation_profile(&[[0.5, 0.3, 0.2]], &[FraudType::StolenCard], &[true]).unwrap();
        assert_eq!(p.by_fraud_type[0].mean, Some([0.5, 0.3, 0.2]));
        assert_eq!(p.by_fraud_type[1].mean, None);
        assert_eq!(p.by_fraud_type[1].n, 0);
        assert_eq!(p.by_class[1].mean, Some([0.5, 0.3, 0.2]));
        assert_eq!(p.by_class[0].mean, None);
    }

    #[test]
    fn matches_streaming_means() {
        let mut r = rng(2);
        let types = [FraudType::StolenCard, FraudType::Other, FraudType::None];
        let mut gates = Vec::new();
        let mut ft = Vec::new();
        for _ in 0..500 {
            let a: f64 = r.random_range(0.0..1.0);
            let b: f64 = r.random_range(0.0..(1.0 - a));
            gates.push([a, b, 1.0 - a - b]);
            ft.push(types[r.random_range(0..3)]);
        }
        let labels: Vec<bool> = ft.iter().map(|t| *t != FraudType::None).collect();
        let p = expert_activation_profile(&gates, &ft, &labels).unwrap();
        for row in &p.by_fraud_type {
            let t: FraudType = row.group.parse().unwrap();
            // running-mean recomputation
            let mut m = [0.0; 3];
            let mut k = 0.0;
            for (g, _) in gates.iter().zip(&ft).filter(|(_, f)| **f == t) {
                k += 1.0;
                for j in 0..3 {
                    m[j] += (g[j] - m[j]) / k;
                }
            }
            match row.mean {
                Some(mean) => {
                    for j in 0..3 {
                        assert!((mean[j] - m[j]).abs() < 1e-12);
                    }
                    assert!((mean.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
                None => assert_eq!(k, 0.0),
            }
        }
        assert_eq!(p.overall.n, 500);
    }
}
