use fraudlab_core::datagen::{generate_corpus, merchant_entropy, GeneratorConfig, GeoPoint, TransactionRecord};

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 }
}

/// Recompute every derived column of row `i` from scratch using only the
/// same-card rows before it.
fn recompute(records: &[TransactionRecord], i: usize) -> [f64; 6] {
    let t = &records[i];
    let history: Vec<&TransactionRecord> =
        records[..i].iter().filter(|r| r.cardholder_id == t.cardholder_id).collect();
    let mut with_current = history.clone();
    with_current.push(t);

    let last5: Vec<f64> = with_current.iter().rev().take(5).map(|r| r.transaction_amount).collect();
    let avg_amount = last5.iter().sum::<f64>() / last5.len() as f64;

    let last6: Vec<f64> = with_current.iter().rev().take(6).map(|r| r.time_of_transaction).collect();
    let interval = if last6.len() < 2 { 0.0 } else { (last6[0] - last6[last6.len() - 1]) / (last6.len() - 1) as f64 };

    let frequency =
        with_current.iter().filter(|r| r.time_of_transaction >= t.time_of_transaction - 168.0).count() as f64;

    let geo = if history.is_empty() {
        0.0
    } else {
        let center = GeoPoint::new(
            median(history.iter().map(|r| r.geolocation.lat).collect()),
            median(history.iter().map(|r| r.geolocation.lon).collect()),
        );
        t.geolocation.haversine_km(&center)
    };

    let spending = if history.len() < 2 {
        0.0
    } else {
        let n = history.len() as f64;
        let mean = history.iter().map(|r| r.transaction_amount).sum::<f64>() / n;
        let sd = (history.iter().map(|r| (r.transaction_amount - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let diff = (t.transaction_amount - mean).abs();
        if sd == 0.0 { if diff == 0.0 { 0.0 } else { 1.0 } } else { (diff / (4.0 * sd)).min(1.0) }
    };

    let entropy = merchant_entropy(with_current.iter().rev().take(20).map(|r| r.merchant_category));
    [avg_amount, interval, frequency, geo, spending, entropy]
}

#[test]
fn derived_columns_match_a_naive_recomputation() {
    let cfg = GeneratorConfig { n_transactions: 3_000, n_accounts: 60, ..GeneratorConfig::default() };
    let records = generate_corpus(&cfg, 17).unwrap().records;
    for (i, t) in records.iter().enumerate() {
        let want = recompute(&records, i);
        let got = [
            t.avg_transaction_amount,
            t.avg_transaction_interval,
            t.transaction_frequency as f64,
            t.geolocation_deviation,
            t.spending_behavior_score,
            t.merchant_entropy,
        ];
        for (k, (a, b)) in got.iter().zip(&want).enumerate() {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "row {i} column {k}: {a} vs {b}");
        }
    }
}
