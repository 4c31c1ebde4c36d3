use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use super::record::{GeoPoint, MerchantCategory, TransactionRecord};
use crate::error::{Error, Result};
use crate::math;

/// Trailing-window lengths for the behavioural drift features.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct FeatureWindows {
    /// Same-card transactions averaged for `avg_transaction_amount`.
    pub amount: usize,
    /// Same-card gaps averaged for `avg_transaction_interval`.
    pub interval: usize,
    /// Same-card transactions in the merchant histogram.
    pub entropy: usize,
    /// Look-back (hours) for `transaction_frequency`, current one included.
    pub frequency_hours: f64,
}

impl Default for FeatureWindows {
    fn default() -> Self {
        FeatureWindows { amount: 5, interval: 5, entropy: 20, frequency_hours: 168.0 }
    }
}

impl FeatureWindows {
    pub fn validate(&self) -> Result<()> {
        if self.amount == 0 || self.interval == 0 || self.entropy == 0 {
            return Err(Error::invalid("feature windows must be at least 1"));
        }
        if !(self.frequency_hours > 0.0) {
            return Err(Error::invalid("frequency window must be positive"));
        }
        Ok(())
    }
}

#[derive(Default)]
struct CardHistory {
    times: VecDeque<f64>,
    amounts: VecDeque<f64>,
    merchants: VecDeque<MerchantCategory>,
    recent: VecDeque<f64>,
    lats: Vec<f64>,
    lons: Vec<f64>,
    n: usize,
    mean: f64,
    m2: f64,
}

/// Fill the derived columns of a time-ordered stream. `anomaly_score` is
/// left untouched.
pub fn compute_behavioral_features(stream: Vec<TransactionRecord>) -> Result<Vec<TransactionRecord>> {
    compute_behavioral_features_with(stream, &FeatureWindows::default())
}

pub fn compute_behavioral_features_with(
    mut stream: Vec<TransactionRecord>,
    windows: &FeatureWindows,
) -> Result<Vec<TransactionRecord>> {
    windows.validate()?;
    if stream.windows(2).any(|w| !(w[0].time_of_transaction <= w[1].time_of_transaction)) {
        return Err(Error::StreamNotOrdered);
    }
    let mut cards: BTreeMap<u64, CardHistory> = BTreeMap::new();
    for t in &mut stream {
        let h = cards.entry(t.cardholder_id).or_default();
        let now = t.time_of_transaction;

        h.geo_deviation_into(t);
        t.spending_behavior_score = h.spending_score(t.transaction_amount);

        h.times.push_back(now);
        if h.times.len() > windows.interval + 1 {
            h.times.pop_front();
        }
        t.avg_transaction_interval = if h.times.len() < 2 {
            0.0
        } else {
            (h.times[h.times.len() - 1] - h.times[0]) / (h.times.len() - 1) as f64
        };

        h.amounts.push_back(t.transaction_amount);
        if h.amounts.len() > windows.amount {
            h.amounts.pop_front();
        }
        t.avg_transaction_amount = h.amounts.iter().sum::<f64>() / h.amounts.len() as f64;

        h.merchants.push_back(t.merchant_category);
        if h.merchants.len() > windows.entropy {
            h.merchants.pop_front();
        }
        t.merchant_entropy = merchant_entropy(h.merchants.iter().copied());

        h.recent.push_back(now);
        while h.recent.front().is_some_and(|&f| f < now - windows.frequency_hours) {
            h.recent.pop_front();
        }
        t.transaction_frequency = h.recent.len() as u32;

        h.absorb(t.transaction_amount, t.geolocation);
    }
    Ok(stream)
}

impl CardHistory {
    fn geo_deviation_into(&self, t: &mut TransactionRecord) {
        t.geolocation_deviation = if self.lats.is_empty() {
            0.0
        } else {
            let center = GeoPoint::new(sorted_median(&self.lats), sorted_median(&self.lons));
            t.geolocation.haversine_km(&center)
        };
    }

    fn spending_score(&self, amount: f64) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let sd = math::sqrt(self.m2 / (self.n - 1) as f64);
        let diff = (amount - self.mean).abs();
        if sd == 0.0 {
            return if diff == 0.0 { 0.0 } else { 1.0 };
        }
        (diff / (4.0 * sd)).min(1.0)
    }

    fn absorb(&mut self, amount: f64, loc: GeoPoint) {
        self.n += 1;
        let delta = amount - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (amount - self.mean);
        insert_sorted(&mut self.lats, loc.lat);
        insert_sorted(&mut self.lons, loc.lon);
    }
}

fn insert_sorted(v: &mut Vec<f64>, x: f64) {
    let pos = v.partition_point(|&y| y <= x);
    v.insert(pos, x);
}

fn sorted_median(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Shannon entropy (nats) of the category histogram.
pub fn merchant_entropy(merchants: impl Iterator<Item = MerchantCategory>) -> f64 {
    let mut counts = [0usize; 16];
    let mut total = 0usize;
    for m in merchants {
        counts[m as usize] += 1;
        total += 1;
    }
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    -counts.iter().filter(|&&c| c > 0).map(|&c| {
        let p = c as f64 / n;
        p * math::ln(p)
    }).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::record::{DeviceType, IpAddress, TransactionType};
    use alloc::vec;

    fn tx(card: u64, time: f64, amount: f64, merchant: MerchantCategory, loc: GeoPoint) -> TransactionRecord {
        TransactionRecord::raw(
            card,
            time,
            amount,
            TransactionType::Purchase,
            merchant,
            loc,
            DeviceType::PosTerminal,
            IpAddress(1),
            0.0,
        )
    }

    #[test]
    fn equal_amounts_average_to_themselves() {
        let home = GeoPoint::new(10.0, 10.0);
        let s: Vec<_> = (0..5).map(|i| tx(1, i as f64, 100.0, MerchantCategory::Groceries, home)).collect();
        let out = compute_behavioral_features(s).unwrap();
        assert!(out.iter().all(|t| t.avg_transaction_amount == 100.0));
        assert!(out.iter().all(|t| t.geolocation_deviation == 0.0));
        assert!(out.iter().all(|t| t.spending_behavior_score == 0.0));
    }

    #[test]
    fn unordered_stream_is_rejected() {
        let home = GeoPoint::new(0.0, 0.0);
        let s = vec![tx(1, 2.0, 1.0, MerchantCategory::Fuel, home), tx(1, 1.0, 1.0, MerchantCategory::Fuel, home)];
        assert_eq!(compute_behavioral_features(s).unwrap_err(), Error::StreamNotOrdered);
    }

    #[test]
    fn hand_built_six_transaction_history() {
        use MerchantCategory::*;
        let a = GeoPoint::new(0.0, 0.0);
        let b = GeoPoint::new(0.0, 1.0);
        let rows = vec![
            tx(7, 0.0, 10.0, Groceries, a),
            tx(7, 2.0, 20.0, Groceries, a),
            tx(7, 5.0, 30.0, Fuel, b),
            tx(7, 9.0, 40.0, Groceries, a),
            tx(7, 14.0, 50.0, Retail, b),
            tx(7, 200.0, 60.0, Fuel, b),
        ];
        let out = compute_behavioral_features(rows).unwrap();

        let avg: Vec<f64> = out.iter().map(|t| t.avg_transaction_amount).collect();
        assert_eq!(avg, vec![10.0, 15.0, 20.0, 25.0, 30.0, 40.0]);

        let interval: Vec<f64> = out.iter().map(|t| t.avg_transaction_interval).collect();
        assert_eq!(interval, vec![0.0, 2.0, 2.5, 3.0, 3.5, 40.0]);

        let freq: Vec<u32> = out.iter().map(|t| t.transaction_frequency).collect();
        assert_eq!(freq, vec![1, 2, 3, 4, 5, 1]);

        // Previous-location medians: -, a, a, (0, 0.5)... lon medians of [0],[0,0],[0,0,1],[0,0,0,1],[0,0,0,1,1].
        let km_per_deg = GeoPoint::new(0.0, 0.0).haversine_km(&GeoPoint::new(0.0, 1.0));
        let geo: Vec<f64> = out.iter().map(|t| t.geolocation_deviation).collect();
        let expect = [0.0, 0.0, km_per_deg, 0.0, km_per_deg, km_per_deg];
        for (g, e) in geo.iter().zip(expect) {
            assert!((g - e).abs() < 1e-9, "{geo:?}");
        }

        // Spending score against previous mean/sample sd.
        // t3: prev [10,20] mean 15 sd 7.0711 -> |30-15|/(4*7.0711) = 0.53033
        assert!((out[2].spending_behavior_score - 15.0 / (4.0 * math::sqrt(50.0))).abs() < 1e-12);
        // t6: prev [10..50] mean 30 sd 15.8114 -> 30/(63.2456) = 0.47434
        assert!((out[5].spending_behavior_score - 30.0 / (4.0 * math::sqrt(250.0))).abs() < 1e-12);

        // Entropy of {G:3, F:2, R:1} over six rows.
        let p = [0.5f64, 1.0 / 3.0, 1.0 / 6.0];
        let h = -p.iter().map(|x| x * math::ln(*x)).sum::<f64>();
        assert!((out[5].merchant_entropy - h).abs() < 1e-12);
    }

    #[test]
    fn cards_do_not_share_windows() {
        let home = GeoPoint::new(0.0, 0.0);
        let s = vec![
            tx(1, 0.0, 10.0, MerchantCategory::Fuel, home),
            tx(2, 1.0, 1000.0, MerchantCategory::Fuel, home),
            tx(1, 2.0, 30.0, MerchantCategory::Fuel, home),
        ];
        let out = compute_behavioral_features(s).unwrap();
        assert_eq!(out[2].avg_transaction_amount, 20.0);
        assert_eq!(out[1].avg_transaction_amount, 1000.0);
    }
}
