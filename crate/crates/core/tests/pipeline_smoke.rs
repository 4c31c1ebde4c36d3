use std::collections::BTreeSet;

use fraudlab_core::datagen::{generate_corpus, GeneratorConfig};
use fraudlab_core::eval::{build_report, prepare, run_fold, ExpertSizes, PipelineSettings, PredictionRecord};
use fraudlab_core::experts::TrainConfig;

fn settings() -> PipelineSettings {
    let quick = TrainConfig { learning_rate: 5e-3, batch_size: 64, max_epochs: 3, patience: 2, batches_per_epoch: Some(4), ..TrainConfig::default() };
    PipelineSettings {
        k_folds: 2,
        validation_cap: 256,
        experts: ExpertSizes { lstm_hidden: 6, d_model: 8, heads: 2, ffn: 8, ae_hidden: 6, ae_bottleneck: 3 },
        expert_training: quick.clone(),
        autoencoder_training: quick.clone(),
        gate_training: quick,
        seed: 5,
        ..PipelineSettings::default()
    }
}

fn corpus() -> Vec<fraudlab_core::datagen::TransactionRecord> {
    let cfg = GeneratorConfig { n_transactions: 6_000, n_accounts: 200, fraud_rate: 0.04, ..GeneratorConfig::default() };
    generate_corpus(&cfg, 5).unwrap().records
}

fn run_all(records: &[fraudlab_core::datagen::TransactionRecord], s: &PipelineSettings) -> Vec<PredictionRecord> {
    let data = prepare(records, s).unwrap();
    let mut seen = BTreeSet::new();
    let mut preds = Vec::new();
    for fold in 0..s.k_folds {
        let r = run_fold(&data, fold, s).unwrap();
        let test: BTreeSet<usize> = r.test_rows.iter().copied().collect();

        // nothing fitted on the held-out fold
        assert!(r.audit.all_rows().all(|row| !test.contains(&row)), "fold {fold} leaks test rows");
        let train_cards: BTreeSet<u64> = r.audit.expert_rows.iter().map(|&i| data.table.meta.cardholder_ids[i]).collect();
        assert!(r.test_rows.iter().all(|&i| !train_cards.contains(&data.table.meta.cardholder_ids[i])));

        assert_eq!(r.frozen_experts, r.model.experts, "gate training touched the experts");
        assert_eq!(r.predictions.iter().map(|p| p.row).collect::<Vec<_>>(), r.test_rows);
        for row in &r.test_rows {
            assert!(seen.insert(*row), "row {row} scored twice");
        }
        preds.extend(r.predictions);
    }
    assert_eq!(seen.len(), data.table.rows());
    preds
}

#[test]
fn two_fold_run_is_leak_free_and_reproducible() {
    let records = corpus();
    let s = settings();
    let a = run_all(&records, &s);
    for p in &a {
        assert!((0.0..=1.0).contains(&p.y));
        assert!((p.g.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let (lo, hi) = p.expert_outputs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        assert!(lo <= p.y && p.y <= hi);
    }
    let report = build_report(&a, s.decision_threshold, &[], &[]).unwrap();
    assert_eq!(report.ablation.len(), 3);
    assert_eq!(report.folds, 2);

    let b = run_all(&records, &s);
    assert_eq!(a, b);
}
