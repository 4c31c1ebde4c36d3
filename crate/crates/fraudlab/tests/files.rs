mod common;

use fraudlab::artifact::{ModelArtifact, FORMAT_VERSION};
use fraudlab::config::PipelineConfig;
use fraudlab::dataset::{read_csv, read_dataset, write_csv, write_dataset, CSV_FILE, JSONL_FILE, MANIFEST_FILE};
use fraudlab::digest::sha256_file;
use fraudlab::Error;
use fraudlab_core::datagen::{generate_corpus, GeneratorConfig};
use fraudlab_core::eval::{fit_full, prepare, score_table};
use proptest::prelude::*;

fn small_generator(n: usize) -> GeneratorConfig {
    GeneratorConfig { n_accounts: 40, n_transactions: n, fraud_rate: 0.05, ..GeneratorConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn csv_round_trip_is_a_fixed_point(seed in any::<u64>(), n in 300usize..800) {
        let corpus = generate_corpus(&small_generator(n), seed).unwrap();
        let mut first = Vec::new();
        write_csv(&corpus.records, &mut first).unwrap();
        let parsed = read_csv(first.as_slice()).unwrap();
        prop_assert_eq!(parsed.len(), corpus.records.len());
        let mut second = Vec::new();
        write_csv(&parsed, &mut second).unwrap();
        prop_assert_eq!(first, second);
    }
}

#[test]
fn dataset_files_are_deterministic_and_consistent() {
    let cfg = small_generator(1500);
    let corpus = generate_corpus(&cfg, 9).unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = write_dataset(a.path(), &corpus, &cfg, 9).unwrap();
    let regenerated = generate_corpus(&cfg, 9).unwrap();
    let mb = write_dataset(b.path(), &regenerated, &cfg, 9).unwrap();
    assert_eq!(ma, mb);
    for file in [CSV_FILE, JSONL_FILE, MANIFEST_FILE] {
        assert_eq!(sha256_file(&a.path().join(file)).unwrap(), sha256_file(&b.path().join(file)).unwrap(), "{file}");
    }
    assert_eq!(ma.files[CSV_FILE], sha256_file(&a.path().join(CSV_FILE)).unwrap());
    let csv = read_dataset(&a.path().join(CSV_FILE)).unwrap();
    let jsonl = read_dataset(&a.path().join(JSONL_FILE)).unwrap();
    assert_eq!(csv, jsonl);
    assert_eq!(csv.len(), 1500);

    let other = write_dataset(b.path(), &generate_corpus(&cfg, 10).unwrap(), &cfg, 10).unwrap();
    assert_ne!(other.files[CSV_FILE], ma.files[CSV_FILE]);
}

#[test]
fn malformed_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.csv");
    std::fs::write(&path, "transaction_id,amount\n1,2\n").unwrap();
    let err = read_dataset(&path).unwrap_err();
    assert!(matches!(err, Error::Data(_)), "{err}");
    assert_eq!(err.exit_code(), 3);
    let missing = read_dataset(&dir.path().join("absent.csv")).unwrap_err();
    assert!(matches!(missing, Error::Io { .. }));
}

#[test]
fn artifact_round_trip_is_byte_identical_and_scores_identically() {
    let cfg = common::tiny();
    let corpus = generate_corpus(&cfg.generator, cfg.seed).unwrap();
    let data = prepare(&corpus.records, &cfg.pipeline).unwrap();
    let (model, preds) = fit_full(&data, &cfg.pipeline).unwrap();
    let artifact = ModelArtifact::from_model(&model, &cfg, corpus.records.len()).unwrap();
    assert_eq!(artifact.format_version, FORMAT_VERSION);
    assert_eq!(artifact.training.seed, cfg.seed);

    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    artifact.save(&first).unwrap();
    let loaded = ModelArtifact::load(&first).unwrap();
    assert_eq!(loaded, artifact);
    loaded.save(&second).unwrap();
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());

    let rebuilt = loaded.to_model().unwrap();
    let rescored = score_table(&rebuilt, &data.table, &cfg.pipeline).unwrap();
    assert_eq!(rescored, preds);

    let text = std::fs::read_to_string(&first).unwrap();
    let bumped = text.replacen(&format!("\"format_version\": {FORMAT_VERSION}"), "\"format_version\": 99", 1);
    assert_ne!(bumped, text);
    match ModelArtifact::from_json(&bumped) {
        Err(Error::UnsupportedVersion { found: 99, supported }) => assert_eq!(supported, FORMAT_VERSION),
        other => panic!("expected a version error, got {other:?}"),
    }
}

#[test]
fn config_rejects_unknown_keys_and_bad_values() {
    for text in [
        "sed = 1\n",
        "[pipeline]\nk_fold = 5\n",
        "[generator]\nfraud_rate = 1.5\n",
        "[pipeline]\nseed = 3\n",
        "[studies]\nwindow_days = []\n",
    ] {
        let err = PipelineConfig::from_toml_str(text).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{text:?}: {err}");
        assert_eq!(err.exit_code(), 2);
    }
    let cfg = common::tiny();
    let snapshot = cfg.to_toml_string().unwrap();
    assert_eq!(PipelineConfig::from_toml_str(&snapshot).unwrap(), cfg);
}
