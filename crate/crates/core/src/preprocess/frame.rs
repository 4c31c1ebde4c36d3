use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::datagen::{merchant_entropy, DeviceType, FraudType, GeoPoint, IpAddress, MerchantCategory, TransactionRecord, TransactionType};
use crate::error::{Error, Result};
use crate::math;

/// Columns derived per record before categorical encoding.
pub const NUMERIC_COLUMNS: [&str; 18] = [
    "transaction_amount",
    "log_amount",
    "amount_to_average",
    "hour_of_day",
    "transaction_frequency",
    "account_balance",
    "avg_transaction_amount",
    "avg_transaction_interval",
    "geolocation_deviation",
    "log_geolocation_deviation",
    "anomaly_score",
    "spending_behavior_score",
    "hours_since_previous",
    "ip_novel",
    "device_novel",
    "merchant_entropy",
    "amount_surprise",
    "log_location_jump",
];

const SURPRISE_PRIOR: f64 = 4.0;

pub const CATEGORICAL_COLUMNS: [&str; 5] =
    ["transaction_type", "merchant_category", "device_information", "ip_address", "cardholder_id"];

/// Record-level metadata carried alongside any feature matrix.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct RowMeta {
    pub labels: Vec<bool>,
    pub fraud_types: Vec<FraudType>,
    pub transaction_types: Vec<TransactionType>,
    pub cardholder_ids: Vec<u64>,
    pub times: Vec<f64>,
}

impl RowMeta {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Numeric and raw categorical columns before encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub numeric_names: Vec<String>,
    /// Row-major, `rows × numeric_names.len()`.
    pub numeric: Vec<f64>,
    pub categorical_names: Vec<String>,
    /// One vector of string values per categorical column.
    pub categorical: Vec<Vec<String>>,
    pub meta: RowMeta,
}

impl RawTable {
    pub fn rows(&self) -> usize {
        self.meta.len()
    }

    pub fn numeric_width(&self) -> usize {
        self.numeric_names.len()
    }
}

/// Turn a time-ordered record stream into a raw table. Per-card history
/// features (gap to previous, network and device novelty, merchant entropy)
/// only look backwards; `lookback_hours` caps the gap feature.
pub fn derive_table(records: &[TransactionRecord], lookback_hours: f64, entropy_window: usize) -> Result<RawTable> {
    if records.windows(2).any(|w| !(w[0].time_of_transaction <= w[1].time_of_transaction)) {
        return Err(Error::StreamNotOrdered);
    }
    if !(lookback_hours > 0.0) || entropy_window == 0 {
        return Err(Error::invalid("lookback and entropy window must be positive"));
    }
    struct History {
        last_time: f64,
        ips: BTreeSet<IpAddress>,
        devices: BTreeSet<DeviceType>,
        merchants: VecDeque<MerchantCategory>,
        last_location: Option<GeoPoint>,
        // Welford running moments of prior amounts
        count: f64,
        mean: f64,
        m2: f64,
    }
    let mut cards: BTreeMap<u64, History> = BTreeMap::new();
    let width = NUMERIC_COLUMNS.len();
    let mut numeric = Vec::with_capacity(records.len() * width);
    let mut categorical: Vec<Vec<String>> = (0..CATEGORICAL_COLUMNS.len()).map(|_| Vec::with_capacity(records.len())).collect();
    let mut meta = RowMeta::default();

    for t in records {
        let h = cards.entry(t.cardholder_id).or_insert_with(|| History {
            last_time: f64::NAN,
            ips: BTreeSet::new(),
            devices: BTreeSet::new(),
            merchants: VecDeque::new(),
            last_location: None,
            count: 0.0,
            mean: 0.0,
            m2: 0.0,
        });
        let gap = if h.last_time.is_nan() { lookback_hours } else { (t.time_of_transaction - h.last_time).min(lookback_hours) };
        let ip_novel = if h.ips.is_empty() || h.ips.contains(&t.ip_address) { 0.0 } else { 1.0 };
        let device_novel =
            if h.devices.is_empty() || h.devices.contains(&t.device_information) { 0.0 } else { 1.0 };
        h.merchants.push_back(t.merchant_category);
        if h.merchants.len() > entropy_window {
            h.merchants.pop_front();
        }
        let entropy = merchant_entropy(h.merchants.iter().copied());
        let surprise = if h.count < 1.0 {
            0.0
        } else {
            // shrink the spread towards a unit coefficient of variation while history is short
            let var = (h.m2 + SURPRISE_PRIOR * h.mean * h.mean) / (h.count - 1.0 + SURPRISE_PRIOR);
            let sd = math::sqrt(var).max(1.0);
            math::ln(1.0 + ((t.transaction_amount - h.mean) / sd).max(0.0))
        };
        let jump = h.last_location.map_or(0.0, |p| p.haversine_km(&t.geolocation));
        h.count += 1.0;
        let delta = t.transaction_amount - h.mean;
        h.mean += delta / h.count;
        h.m2 += delta * (t.transaction_amount - h.mean);
        h.last_location = Some(t.geolocation);
        h.last_time = t.time_of_transaction;
        h.ips.insert(t.ip_address);
        h.devices.insert(t.device_information);

        let avg = t.avg_transaction_amount;
        numeric.extend_from_slice(&[
            t.transaction_amount,
            math::ln(1.0 + t.transaction_amount.max(0.0)),
            if avg > 0.0 { t.transaction_amount / avg } else { 1.0 },
            t.time_of_transaction - 24.0 * math::floor(t.time_of_transaction / 24.0),
            t.transaction_frequency as f64,
            t.account_balance,
            avg,
            t.avg_transaction_interval,
            t.geolocation_deviation,
            math::ln(1.0 + t.geolocation_deviation.max(0.0)),
            t.anomaly_score,
            t.spending_behavior_score,
            gap,
            ip_novel,
            device_novel,
            entropy,
            surprise,
            math::ln(1.0 + jump),
        ]);
        categorical[0].push(t.transaction_type.as_str().to_string());
        categorical[1].push(t.merchant_category.as_str().to_string());
        categorical[2].push(t.device_information.as_str().to_string());
        categorical[3].push(t.ip_address.to_string());
        categorical[4].push(t.cardholder_id.to_string());

        meta.labels.push(t.is_fraud());
        meta.fraud_types.push(t.fraud_type);
        meta.transaction_types.push(t.transaction_type);
        meta.cardholder_ids.push(t.cardholder_id);
        meta.times.push(t.time_of_transaction);
    }
    if numeric.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteValue);
    }
    Ok(RawTable {
        numeric_names: NUMERIC_COLUMNS.iter().map(|s| s.to_string()).collect(),
        numeric,
        categorical_names: CATEGORICAL_COLUMNS.iter().map(|s| s.to_string()).collect(),
        categorical,
        meta,
    })
}

/// A high-cardinality categorical column as integer indices (0 = unknown).
#[derive(Clone, Debug, PartialEq)]
pub struct IndexColumn {
    pub name: String,
    pub values: Vec<u32>,
}

/// Encoded dense feature matrix plus row metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFrame {
    pub columns: Vec<String>,
    /// Row-major, `rows × columns.len()`.
    pub data: Vec<f64>,
    pub meta: RowMeta,
    /// Index-encoded columns; kept for analysis, not part of `data`.
    pub index_columns: Vec<IndexColumn>,
}

impl FeatureFrame {
    pub fn new(columns: Vec<String>, data: Vec<f64>, meta: RowMeta) -> Result<Self> {
        let width = columns.len();
        if width == 0 || data.len() != width * meta.len() {
            return Err(Error::ShapeMismatch { shape: alloc::vec![meta.len(), width], len: data.len() });
        }
        let mut names = columns.clone();
        names.sort();
        names.dedup();
        if names.len() != width {
            return Err(Error::invalid("column names must be unique"));
        }
        Ok(FeatureFrame { columns, data, meta, index_columns: Vec::new() })
    }

    pub fn rows(&self) -> usize {
        self.meta.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.width();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Copy the given rows into a flat row-major buffer.
    pub fn gather(&self, rows: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len() * self.width());
        for &r in rows {
            out.extend_from_slice(self.row(r));
        }
        out
    }

    /// Append synthetic rows, each on a card of its own with no history.
    /// Returns the index of the first appended row.
    pub fn append_synthetic(&mut self, rows: &[f64], label: bool, fraud_types: &[FraudType]) -> Result<usize> {
        let d = self.width();
        if rows.len() % d != 0 {
            return Err(Error::WidthMismatch { expected: d, got: rows.len() % d });
        }
        let start = self.rows();
        let n = rows.len() / d;
        if fraud_types.len() != n {
            return Err(Error::LengthMismatch(fraud_types.len(), n));
        }
        self.data.extend_from_slice(rows);
        for (i, &fraud_type) in fraud_types.iter().enumerate() {
            self.meta.labels.push(label);
            self.meta.fraud_types.push(fraud_type);
            self.meta.transaction_types.push(TransactionType::Purchase);
            self.meta.cardholder_ids.push(u64::MAX - (start + i) as u64);
            self.meta.times.push(f64::NAN);
        }
        for c in &mut self.index_columns {
            c.values.extend(core::iter::repeat_n(0, n));
        }
        Ok(start)
    }
}
