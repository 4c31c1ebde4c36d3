//! Dataset files: a CSV with the fifteen schema columns plus `label` and
//! `fraud_type`, a JSON-lines mirror with the same fields, and the
//! generation manifest.
//!
//! Floats are written with six decimals and geolocation as `lat;lon`.
//! Both readers return exactly the values the CSV holds, so training from
//! either file gives the same result.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use fraudlab_core::datagen::{
    Corpus, DeviceType, FraudType, GeneratorConfig, GeoPoint, IpAddress, Label, MerchantCategory, TransactionRecord,
    TransactionType, SCHEMA_COLUMNS,
};
use serde::{Deserialize, Serialize};

use crate::digest::sha256_file;
use crate::error::{Error, Result};

pub const CSV_FILE: &str = "dataset.csv";
pub const JSONL_FILE: &str = "dataset.jsonl";
pub const MANIFEST_FILE: &str = "generation_manifest.json";

/// The seventeen dataset columns in file order.
pub fn header() -> Vec<&'static str> {
    SCHEMA_COLUMNS.iter().copied().chain(["label", "fraud_type"]).collect()
}

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

fn round6(v: f64) -> f64 {
    fixed(v).parse().expect("formatted float parses")
}

fn csv_fields(t: &TransactionRecord) -> [String; 17] {
    [
        fixed(t.transaction_amount),
        t.transaction_type.to_string(),
        fixed(t.time_of_transaction),
        t.merchant_category.to_string(),
        format!("{};{}", fixed(t.geolocation.lat), fixed(t.geolocation.lon)),
        t.cardholder_id.to_string(),
        t.transaction_frequency.to_string(),
        t.device_information.to_string(),
        t.ip_address.to_string(),
        fixed(t.account_balance),
        fixed(t.avg_transaction_amount),
        fixed(t.avg_transaction_interval),
        fixed(t.geolocation_deviation),
        fixed(t.anomaly_score),
        fixed(t.spending_behavior_score),
        t.label.to_string(),
        t.fraud_type.to_string(),
    ]
}

pub fn write_csv<W: Write>(records: &[TransactionRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header()).map_err(Error::data)?;
    for t in records {
        w.write_record(csv_fields(t)).map_err(Error::data)?;
    }
    w.flush().map_err(Error::data)
}

fn parse<T: std::str::FromStr>(line: usize, column: &str, text: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    text.parse().map_err(|e| Error::Data(format!("line {line}, column `{column}`: cannot parse `{text}`: {e}")))
}

fn parse_geo(line: usize, text: &str) -> Result<GeoPoint> {
    let (lat, lon) = text
        .split_once(';')
        .ok_or_else(|| Error::Data(format!("line {line}, column `geolocation`: expected `lat;lon`, got `{text}`")))?;
    Ok(GeoPoint { lat: parse(line, "geolocation", lat)?, lon: parse(line, "geolocation", lon)? })
}

/// Reject rows that break the record invariants.
fn check_record(line: usize, t: &TransactionRecord) -> Result<()> {
    let bad = |m: &str| Err(Error::Data(format!("line {line}: {m}")));
    let floats = [
        t.transaction_amount,
        t.time_of_transaction,
        t.geolocation.lat,
        t.geolocation.lon,
        t.account_balance,
        t.avg_transaction_amount,
        t.avg_transaction_interval,
        t.geolocation_deviation,
    ];
    if floats.iter().any(|v| !v.is_finite()) {
        return bad("non-finite value");
    }
    if !(0.0..=1.0).contains(&t.anomaly_score) || !(0.0..=1.0).contains(&t.spending_behavior_score) {
        return bad("scores must lie in [0, 1]");
    }
    if t.geolocation_deviation < 0.0 {
        return bad("negative geolocation deviation");
    }
    if (t.fraud_type == FraudType::None) != (t.label == Label::Legit) {
        return bad("fraud_type must be None exactly when the label is legit");
    }
    Ok(())
}

fn check_order(records: &[TransactionRecord]) -> Result<()> {
    match records.windows(2).position(|w| !(w[0].time_of_transaction <= w[1].time_of_transaction)) {
        Some(i) => Err(Error::Data(format!("line {}: rows must be sorted by time_of_transaction", i + 3))),
        None => Ok(()),
    }
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TransactionRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let head = rdr.headers().map_err(Error::data)?.clone();
    let expected = header();
    if head.iter().ne(expected.iter().copied()) {
        return Err(Error::Data(format!(
            "header mismatch: expected {} columns `{}`, got `{}`",
            expected.len(),
            expected.join(","),
            head.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
        let f = |j: usize| &row[j];
        let mut t = TransactionRecord::raw(
            parse(line, "cardholder_id", f(5))?,
            parse(line, "time_of_transaction", f(2))?,
            parse(line, "transaction_amount", f(0))?,
            parse::<TransactionType>(line, "transaction_type", f(1))?,
            parse::<MerchantCategory>(line, "merchant_category", f(3))?,
            parse_geo(line, f(4))?,
            parse::<DeviceType>(line, "device_information", f(7))?,
            parse::<IpAddress>(line, "ip_address", f(8))?,
            parse(line, "account_balance", f(9))?,
        );
        t.transaction_frequency = parse(line, "transaction_frequency", f(6))?;
        t.avg_transaction_amount = parse(line, "avg_transaction_amount", f(10))?;
        t.avg_transaction_interval = parse(line, "avg_transaction_interval", f(11))?;
        t.geolocation_deviation = parse(line, "geolocation_deviation", f(12))?;
        t.anomaly_score = parse(line, "anomaly_score", f(13))?;
        t.spending_behavior_score = parse(line, "spending_behavior_score", f(14))?;
        t.label = parse(line, "label", f(15))?;
        t.fraud_type = parse(line, "fraud_type", f(16))?;
        check_record(line, &t)?;
        out.push(t);
    }
    check_order(&out)?;
    Ok(out)
}

/// One JSON-lines row; field names match the CSV header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    transaction_amount: f64,
    transaction_type: TransactionType,
    time_of_transaction: f64,
    merchant_category: MerchantCategory,
    geolocation: GeoPoint,
    cardholder_id: u64,
    transaction_frequency: u32,
    device_information: DeviceType,
    ip_address: String,
    account_balance: f64,
    avg_transaction_amount: f64,
    avg_transaction_interval: f64,
    geolocation_deviation: f64,
    anomaly_score: f64,
    spending_behavior_score: f64,
    label: Label,
    fraud_type: FraudType,
}

impl JsonRow {
    fn from_record(t: &TransactionRecord) -> Self {
        JsonRow {
            transaction_amount: round6(t.transaction_amount),
            transaction_type: t.transaction_type,
            time_of_transaction: round6(t.time_of_transaction),
            merchant_category: t.merchant_category,
            geolocation: GeoPoint { lat: round6(t.geolocation.lat), lon: round6(t.geolocation.lon) },
            cardholder_id: t.cardholder_id,
            transaction_frequency: t.transaction_frequency,
            device_information: t.device_information,
            ip_address: t.ip_address.to_string(),
            account_balance: round6(t.account_balance),
            avg_transaction_amount: round6(t.avg_transaction_amount),
            avg_transaction_interval: round6(t.avg_transaction_interval),
            geolocation_deviation: round6(t.geolocation_deviation),
            anomaly_score: round6(t.anomaly_score),
            spending_behavior_score: round6(t.spending_behavior_score),
            label: t.label,
            fraud_type: t.fraud_type,
        }
    }

    fn into_record(self, line: usize) -> Result<TransactionRecord> {
        let mut t = TransactionRecord::raw(
            self.cardholder_id,
            self.time_of_transaction,
            self.transaction_amount,
            self.transaction_type,
            self.merchant_category,
            self.geolocation,
            self.device_information,
            parse(line, "ip_address", &self.ip_address)?,
            self.account_balance,
        );
        t.transaction_frequency = self.transaction_frequency;
        t.avg_transaction_amount = self.avg_transaction_amount;
        t.avg_transaction_interval = self.avg_transaction_interval;
        t.geolocation_deviation = self.geolocation_deviation;
        t.anomaly_score = self.anomaly_score;
        t.spending_behavior_score = self.spending_behavior_score;
        t.label = self.label;
        t.fraud_type = self.fraud_type;
        check_record(line, &t)?;
        Ok(t)
    }
}

pub fn write_jsonl<W: Write>(records: &[TransactionRecord], mut out: W) -> Result<()> {
    for t in records {
        serde_json::to_writer(&mut out, &JsonRow::from_record(t)).map_err(Error::data)?;
        out.write_all(b"\n").map_err(Error::data)?;
    }
    out.flush().map_err(Error::data)
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TransactionRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(Error::data)?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(&line).map_err(|e| Error::Data(format!("line {line_no}: {e}")))?;
        out.push(row.into_record(line_no)?);
    }
    check_order(&out)?;
    Ok(out)
}

/// Read a dataset file; `.jsonl` files use the JSON-lines reader, anything
/// else the CSV reader.
pub fn read_dataset(path: &Path) -> Result<Vec<TransactionRecord>> {
    let file = File::open(path).map_err(Error::io(path))?;
    let records = if path.extension().is_some_and(|e| e == "jsonl") {
        read_jsonl(BufReader::new(file))
    } else {
        read_csv(BufReader::new(file))
    }
    .map_err(|e| match e {
        Error::Data(m) => Error::Data(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if records.is_empty() {
        return Err(Error::Data(format!("{}: no rows", path.display())));
    }
    Ok(records)
}

/// Summary written next to the generated files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationManifest {
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub rows: usize,
    pub accounts: usize,
    pub horizon_days: f64,
    pub fraud_count: usize,
    pub realized_fraud_rate: f64,
    pub typology_counts: BTreeMap<String, usize>,
    pub typology_shares: BTreeMap<String, f64>,
    /// SHA-256 of each written file.
    pub files: BTreeMap<String, String>,
}

pub fn manifest_for(corpus: &Corpus, cfg: &GeneratorConfig, seed: u64) -> GenerationManifest {
    let n = corpus.records.len();
    let fraud_count = corpus.records.iter().filter(|t| t.is_fraud()).count();
    let mut typology_counts = BTreeMap::new();
    let mut typology_shares = BTreeMap::new();
    for kind in FraudType::TYPOLOGIES {
        let c = corpus.records.iter().filter(|t| t.fraud_type == *kind).count();
        typology_counts.insert(kind.to_string(), c);
        typology_shares.insert(kind.to_string(), if fraud_count == 0 { 0.0 } else { c as f64 / fraud_count as f64 });
    }
    GenerationManifest {
        seed,
        generator: cfg.clone(),
        rows: n,
        accounts: corpus.accounts.len(),
        horizon_days: corpus.horizon_days,
        fraud_count,
        realized_fraud_rate: if n == 0 { 0.0 } else { fraud_count as f64 / n as f64 },
        typology_counts,
        typology_shares,
        files: BTreeMap::new(),
    }
}

/// Write the CSV, the JSON-lines mirror and the manifest into `dir`.
pub fn write_dataset(dir: &Path, corpus: &Corpus, cfg: &GeneratorConfig, seed: u64) -> Result<GenerationManifest> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    let mut manifest = manifest_for(corpus, cfg, seed);
    for name in [CSV_FILE, JSONL_FILE] {
        let path = dir.join(name);
        let file = BufWriter::new(File::create(&path).map_err(Error::io(&path))?);
        if name == CSV_FILE {
            write_csv(&corpus.records, file)?;
        } else {
            write_jsonl(&corpus.records, file)?;
        }
        manifest.files.insert(name.to_string(), sha256_file(&path)?);
    }
    crate::write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
