use fraudlab_core::datagen::{generate_corpus, FraudType, GeneratorConfig};

#[test]
fn desk_corpus_matches_target_statistics() {
    let cfg = GeneratorConfig::default();
    let corpus = generate_corpus(&cfg, 42).unwrap();
    let n = corpus.records.len();
    assert_eq!(n, 50_000);

    let frauds: Vec<_> = corpus.records.iter().filter(|t| t.is_fraud()).collect();
    let prevalence = frauds.len() as f64 / n as f64;
    assert!((prevalence - 0.015).abs() <= 0.001, "prevalence {prevalence}");

    for (kind, target) in FraudType::TYPOLOGIES.iter().zip([0.40, 0.30, 0.20, 0.10]) {
        let share = frauds.iter().filter(|t| t.fraud_type == *kind).count() as f64 / frauds.len() as f64;
        assert!((share - target).abs() <= 0.01, "{kind:?} share {share}");
    }

    let mean = corpus.records.iter().map(|t| t.transaction_amount).sum::<f64>() / n as f64;
    assert!((mean - 150.75).abs() <= 0.1 * 150.75, "amount mean {mean}");

    assert!(corpus.records.windows(2).all(|w| w[0].time_of_transaction <= w[1].time_of_transaction));
    assert!(corpus.records.iter().all(|t| (0.0..=1.0).contains(&t.anomaly_score)));
}

#[test]
fn regeneration_is_exact() {
    let cfg = GeneratorConfig { n_transactions: 5_000, n_accounts: 200, ..GeneratorConfig::default() };
    let a = generate_corpus(&cfg, 9).unwrap();
    let b = generate_corpus(&cfg, 9).unwrap();
    assert_eq!(a.records, b.records);
    let bits = |c: &fraudlab_core::datagen::Corpus| -> Vec<u64> {
        c.records.iter().flat_map(|t| [t.transaction_amount.to_bits(), t.anomaly_score.to_bits()]).collect()
    };
    assert_eq!(bits(&a), bits(&b));
}
