//! One test per acceptance criterion. Each prints a PASS/FAIL line straight
//! to stdout so the verdicts show up without `--nocapture`.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use fraudlab::dataset::write_csv;
use fraudlab::digest::sha256_hex;
use fraudlab::report::write_prediction_log;
use fraudlab::run::{cross_validate, preprocessing_settings, thread_count, CvRun};
use fraudlab_core::datagen::{generate_corpus, FraudType, GeneratorConfig, IsolationForest};
use fraudlab_core::eval::{average_precision, build_report, prepare, roc_auc, MetricsReport, PipelineSettings};
use fraudlab_core::experts::{
    AutoencoderConfig, AutoencoderExpert, ExpertKind, LstmConfig, LstmExpert, RowBatch, SequenceBatch, SequenceExpert,
    TransformerConfig, TransformerExpert,
};
use fraudlab_core::moe::{
    combine, expert_index, gate_forward, gate_objective, gate_predict, GateData, GateInput, GateParams, EXPERT_COUNT,
};
use fraudlab_core::numerics::{gradient_check, Tensor};
use fraudlab_core::preprocess::{smote_deficit, smote_oversample};
use fraudlab_core::rng::rng;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const SEEDS: [u64; 3] = [42, 7, 11];

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let mut out = std::io::stdout().lock();
    let tag = if pass { "PASS" } else { "FAIL" };
    writeln!(out, "[{tag}] criterion {id:>2} {name}: {detail}").unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

// ---- 1. gradients --------------------------------------------------------

const CONFIGS: u64 = 20;
const STEP: f64 = 1e-6;

fn random_batch(r: &mut impl Rng, batch: usize, steps: usize, width: usize) -> SequenceBatch {
    let data = (0..batch * steps * width).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut mask = Vec::with_capacity(batch * steps);
    for _ in 0..batch {
        let pad = r.random_range(0..steps);
        mask.extend((0..steps).map(|t| t >= pad));
    }
    let targets = (0..batch).map(|_| if r.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
    SequenceBatch::new(batch, steps, width, data, mask, targets).unwrap()
}

fn sequence_error(e: &dyn SequenceExpert, r: &mut impl Rng, batch: &SequenceBatch) -> f64 {
    let weights: Vec<f64> = (0..batch.batch).map(|_| r.random_range(0.5..3.0)).collect();
    gradient_check(
        |g, p| {
            let y = e.forward_graph(g, p, batch)?;
            Ok(g.weighted_bce(y, batch.targets.clone(), weights.clone()))
        },
        e.params(),
        STEP,
    )
    .unwrap()
}

fn lstm_worst() -> f64 {
    (0..CONFIGS)
        .map(|seed| {
            let mut r = rng(1_000 + seed);
            let (width, hidden) = (r.random_range(1..5), r.random_range(1..5));
            let (n, steps) = (r.random_range(1..4), r.random_range(1..5));
            let batch = random_batch(&mut r, n, steps, width);
            let e = LstmExpert::new(LstmConfig { input_width: width, hidden }, seed).unwrap();
            sequence_error(&e, &mut r, &batch)
        })
        .fold(0.0, f64::max)
}

fn transformer_worst() -> f64 {
    (0..CONFIGS)
        .map(|seed| {
            let mut r = rng(2_000 + seed);
            let heads = r.random_range(1..3);
            let d_model = heads * r.random_range(1..4);
            let (width, window) = (r.random_range(1..4), r.random_range(1..5));
            let cfg = TransformerConfig { input_width: width, window, d_model, heads, ffn: r.random_range(1..6) };
            let e = TransformerExpert::new(cfg, seed).unwrap();
            let n = r.random_range(1..4);
            let batch = random_batch(&mut r, n, window, width);
            sequence_error(&e, &mut r, &batch)
        })
        .fold(0.0, f64::max)
}

fn autoencoder_worst() -> f64 {
    (0..CONFIGS)
        .map(|seed| {
            let mut r = rng(3_000 + seed);
            let width = r.random_range(2..7);
            let bottleneck = r.random_range(1..width);
            let cfg = AutoencoderConfig { input_width: width, hidden: r.random_range(1..6), bottleneck };
            let e = AutoencoderExpert::new(cfg, seed).unwrap();
            let n = r.random_range(1..5);
            let data = (0..n * width).map(|_| r.random_range(0.0..1.0)).collect();
            let rows = RowBatch::new(width, data, vec![0.0; n]).unwrap();
            gradient_check(|g, p| e.loss_graph(g, p, &rows), e.params(), STEP).unwrap()
        })
        .fold(0.0, f64::max)
}

fn gate_worst() -> f64 {
    (0..CONFIGS)
        .map(|seed| {
            let mut r = rng(4_000 + seed);
            let (width, n) = (r.random_range(1..6), r.random_range(1..8));
            let inputs = (0..n * width).map(|_| r.random_range(-1.0..1.0)).collect();
            let outputs = (0..n).map(|_| [r.random(), r.random(), r.random()]).collect();
            let targets = (0..n).map(|_| if r.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
            let data = GateData::new(width, inputs, outputs, targets).unwrap();
            let mut active = [true; EXPERT_COUNT];
            if r.random_bool(0.3) {
                active[r.random_range(0..EXPERT_COUNT)] = false;
            }
            let lambda = r.random_range(0.0..0.5);
            let weight = (0..width * EXPERT_COUNT).map(|_| r.random_range(-1.0..1.0)).collect();
            let bias = (0..EXPERT_COUNT).map(|_| r.random_range(-1.0..1.0)).collect();
            let params = [Tensor::new(vec![width, EXPERT_COUNT], weight).unwrap(), Tensor::vector(bias)];
            let weights = (r.random_range(1.0..6.0), r.random_range(0.3..1.0));
            gradient_check(|g, p| Ok(gate_objective(g, p[0], p[1], &data, active, lambda, weights)), &params, STEP)
                .unwrap()
        })
        .fold(0.0, f64::max)
}

#[test]
fn criterion_01_gradient_suite() {
    let start = Instant::now();
    let worst = [("lstm", lstm_worst()), ("transformer", transformer_worst()), ("autoencoder", autoencoder_worst()), ("gate", gate_worst())];
    let secs = start.elapsed().as_secs_f64();
    let pass = worst.iter().all(|(_, e)| *e < 1e-4) && secs < 30.0;
    let detail = worst.iter().map(|(n, e)| format!("{n} {e:.2e}")).collect::<Vec<_>>().join(", ");
    verdict(1, "gradient suite", pass, &format!("max rel err {detail} (< 1e-4), {secs:.1}s (< 30s)"));
}

// ---- 2. metric oracles ---------------------------------------------------

fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    let pos = scores.iter().zip(labels).filter(|(_, &y)| y).map(|(s, _)| *s);
    for si in pos {
        for sj in scores.iter().zip(labels).filter(|(_, &y)| !y).map(|(s, _)| *s) {
            pairs += 1.0;
            wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
        }
    }
    wins / pairs
}

fn brute_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let pos = labels.iter().filter(|&&y| y).count() as f64;
    let mut thresholds = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (mut prev_recall, mut ap) = (0.0, 0.0);
    for t in thresholds {
        let flagged: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
        let tp = flagged.iter().filter(|&&i| labels[i]).count() as f64;
        ap += (tp / pos - prev_recall) * tp / flagged.len() as f64;
        prev_recall = tp / pos;
    }
    ap
}

#[test]
fn criterion_02_metric_oracles() {
    let (mut worst_auc, mut worst_ap, mut tie_heavy) = (0.0f64, 0.0f64, 0);
    for seed in 0..100u64 {
        let mut r = rng(5_000 + seed);
        let n = r.random_range(2..=200);
        let coarse = seed % 2 == 0;
        tie_heavy += usize::from(coarse);
        let mut labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.3)).collect();
        labels[0] = true;
        labels[1] = false;
        let scores: Vec<f64> = (0..n)
            .map(|i| {
                let base: f64 = if coarse { r.random_range(0..5) as f64 / 4.0 } else { r.random() };
                if labels[i] && !coarse { (base + 0.2).min(1.0) } else { base }
            })
            .collect();
        worst_auc = worst_auc.max((roc_auc(&scores, &labels).unwrap() - brute_auc(&scores, &labels)).abs());
        worst_ap = worst_ap.max((average_precision(&scores, &labels).unwrap() - brute_ap(&scores, &labels)).abs());
    }
    verdict(
        2,
        "metric oracles",
        worst_auc < 1e-12 && worst_ap < 1e-12,
        &format!("100 instances ({tie_heavy} tie-heavy), max |auc diff| {worst_auc:.1e}, max |ap diff| {worst_ap:.1e} (< 1e-12)"),
    )
}

// ---- 3. gate algebra -----------------------------------------------------

#[test]
fn criterion_03_gate_algebra() {
    const WIDTH: usize = 5;
    let mut r = rng(6_000);
    let (mut simplex_err, mut shift_err, mut hull_violations, mut one_hot_mismatches) = (0.0f64, 0.0f64, 0, 0);
    for _ in 0..10_000 {
        let mut p = GateParams::zeros(WIDTH, GateInput::Features, 0.01).unwrap();
        p.weight = Tensor::new(vec![WIDTH, EXPERT_COUNT], (0..WIDTH * EXPERT_COUNT).map(|_| r.random_range(-20.0..20.0)).collect())
            .unwrap();
        p.bias = Tensor::vector((0..EXPERT_COUNT).map(|_| r.random_range(-20.0..20.0)).collect());
        let x: Vec<f64> = (0..WIDTH).map(|_| r.random_range(-5.0..5.0)).collect();
        let g = gate_forward(&x, &p).unwrap();
        let off = (g.iter().sum::<f64>() - 1.0).abs();
        simplex_err = simplex_err.max(if g.iter().all(|&v| v >= 0.0) { off } else { f64::INFINITY });

        let mut shifted = p.clone();
        let c = r.random_range(-50.0..50.0);
        shifted.bias.data_mut().iter_mut().for_each(|b| *b += c);
        let h = gate_forward(&x, &shifted).unwrap();
        shift_err = (0..EXPERT_COUNT).fold(shift_err, |m, j| m.max((g[j] - h[j]).abs()));

        let e: [f64; 3] = [r.random(), r.random(), r.random()];
        let y = combine(&g, &e);
        let (lo, hi) = (e.iter().copied().fold(f64::INFINITY, f64::min), e.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        hull_violations += usize::from(!(lo <= y && y <= hi));

        let pick = r.random_range(0..EXPERT_COUNT);
        let mut one_hot = p;
        for kind in ExpertKind::ALL {
            if expert_index(kind) != pick {
                one_hot = one_hot.without(kind);
            }
        }
        let data = GateData::new(WIDTH, x, vec![e], vec![0.0]).unwrap();
        let out = gate_predict(&data, &one_hot).unwrap()[0];
        one_hot_mismatches += usize::from(out.y != e[pick] || (out.y >= 0.5) != (e[pick] >= 0.5));
    }
    let pass = simplex_err <= 1e-9 && shift_err < 1e-12 && hull_violations == 0 && one_hot_mismatches == 0;
    verdict(
        3,
        "gate algebra",
        pass,
        &format!(
            "10000 inputs, max |sum-1| {simplex_err:.1e}, max shift diff {shift_err:.1e}, hull violations {hull_violations}, one-hot mismatches {one_hot_mismatches}"
        ),
    );
}

// ---- 4. SMOTE ------------------------------------------------------------

fn brute_knn(data: &[f64], d: usize, i: usize, k: usize) -> Vec<usize> {
    let dist = |j: usize| (0..d).map(|c| (data[i * d + c] - data[j * d + c]).powi(2)).sum::<f64>();
    let mut others: Vec<usize> = (0..data.len() / d).filter(|&j| j != i).collect();
    others.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
    others.truncate(k);
    others
}

#[test]
fn criterion_04_smote_geometry() {
    let (mut worst_residual, mut off_neighbor, mut count_errors, mut samples) = (0.0f64, 0, 0, 0);
    for seed in 0..200u64 {
        let mut r = rng(7_000 + seed);
        let (d, n, k) = (r.random_range(1..6), r.random_range(7..40), r.random_range(1..6));
        let data: Vec<f64> = (0..d * n).map(|_| r.random_range(-10.0..10.0)).collect();
        let majority = r.random_range(n..2_000);
        let ratio = r.random_range(0.05..1.0);
        let extra = smote_deficit(n, majority, ratio);
        let target = (ratio * majority as f64).round() as usize;
        count_errors += usize::from(n + extra != n.max(target));
        if extra == 0 {
            continue;
        }
        let s = smote_oversample(&data, d, k, extra, seed).unwrap();
        count_errors += usize::from(s.len() != extra || s.data.len() != extra * d);
        for (i, o) in s.origins.iter().enumerate() {
            samples += 1;
            off_neighbor += usize::from(!brute_knn(&data, d, o.base, k).contains(&o.neighbor));
            let base = &data[o.base * d..(o.base + 1) * d];
            let nb = &data[o.neighbor * d..(o.neighbor + 1) * d];
            let x = &s.data[i * d..(i + 1) * d];
            let seg: Vec<f64> = (0..d).map(|c| nb[c] - base[c]).collect();
            let off: Vec<f64> = (0..d).map(|c| x[c] - base[c]).collect();
            let len2: f64 = seg.iter().map(|v| v * v).sum();
            let t = if len2 > 0.0 { seg.iter().zip(&off).map(|(a, b)| a * b).sum::<f64>() / len2 } else { 0.0 };
            let residual = (0..d).map(|c| (off[c] - t * seg[c]).powi(2)).sum::<f64>().sqrt();
            let outside = if (-1e-12..=1.0 + 1e-12).contains(&t) { 0.0 } else { f64::INFINITY };
            worst_residual = worst_residual.max(residual + outside);
        }
    }
    verdict(
        4,
        "SMOTE geometry",
        worst_residual < 1e-9 && off_neighbor == 0 && count_errors == 0,
        &format!("{samples} synthetic rows, max residual {worst_residual:.1e}, non-neighbor pairs {off_neighbor}, count mismatches {count_errors}"),
    );
}

// ---- 5. generator --------------------------------------------------------

fn corpus_digest(records: &[fraudlab_core::datagen::TransactionRecord]) -> String {
    let mut bytes = Vec::new();
    write_csv(records, &mut bytes).unwrap();
    sha256_hex(&bytes)
}

#[test]
fn criterion_05_generator_statistics() {
    let cfg = GeneratorConfig::default();
    let corpus = generate_corpus(&cfg, 42).unwrap();
    let n = corpus.records.len();
    let frauds: Vec<_> = corpus.records.iter().filter(|t| t.is_fraud()).collect();
    let prevalence = frauds.len() as f64 / n as f64;
    let shares: Vec<f64> = FraudType::TYPOLOGIES
        .iter()
        .map(|kind| frauds.iter().filter(|t| t.fraud_type == *kind).count() as f64 / frauds.len() as f64)
        .collect();
    let share_err = shares.iter().zip([0.40, 0.30, 0.20, 0.10]).map(|(s, t)| (s - t).abs()).fold(0.0, f64::max);
    let mean = corpus.records.iter().map(|t| t.transaction_amount).sum::<f64>() / n as f64;
    let identical = corpus_digest(&corpus.records) == corpus_digest(&generate_corpus(&cfg, 42).unwrap().records);
    let pass = n == 50_000
        && (prevalence - 0.015).abs() <= 0.001
        && share_err <= 0.01
        && (mean - 150.75).abs() <= 0.1 * 150.75
        && identical;
    verdict(
        5,
        "generator statistics",
        pass,
        &format!(
            "{n} rows, prevalence {:.3}%, shares {:.1}/{:.1}/{:.1}/{:.1}%, amount mean {mean:.2}, byte-identical regeneration {identical}",
            100.0 * prevalence,
            100.0 * shares[0],
            100.0 * shares[1],
            100.0 * shares[2],
            100.0 * shares[3]
        ),
    );
}

// ---- 6. isolation forest -------------------------------------------------

fn planted_outlier_wins(seed: u64) -> bool {
    const DIMS: usize = 4;
    const INLIERS: usize = 500;
    let mut r = rng(8_000 + seed);
    let mut data: Vec<f64> = (0..INLIERS * DIMS).map(|_| StandardNormal.sample(&mut r)).collect();
    let dir: Vec<f64> = (0..DIMS).map(|_| StandardNormal.sample(&mut r)).collect();
    let norm = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
    let at = r.random_range(0..INLIERS);
    data.splice(at * DIMS..at * DIMS, dir.iter().map(|v| 10.0 * v / norm));
    let scores = IsolationForest::fit(&data, DIMS, 100, 256, seed).unwrap().score_rows(&data).unwrap();
    let mut inliers: Vec<f64> = scores.iter().enumerate().filter(|(i, _)| *i != at).map(|(_, s)| *s).collect();
    inliers.sort_by(f64::total_cmp);
    scores[at] > inliers[(inliers.len() as f64 * 0.95) as usize]
}

#[test]
fn criterion_06_isolation_forest() {
    let hits = (0..100).filter(|&s| planted_outlier_wins(s)).count();
    verdict(6, "isolation forest", hits >= 95, &format!("{hits}/100 planted outliers above the inlier 95th percentile (>= 95)"));
}

// ---- 7-12. scaled pipeline study -----------------------------------------

struct SeedStudy {
    seed: u64,
    cv_seconds: f64,
    report: MetricsReport,
    runs: Vec<CvRun>,
    digest: String,
}

/// Generate, cross-validate and digest the corpus and prediction log.
fn pipeline(seed: u64, threads: usize) -> (Vec<fraudlab_core::datagen::TransactionRecord>, PipelineSettings, CvRun, f64, String) {
    let corpus = generate_corpus(&GeneratorConfig::default(), seed).unwrap();
    let settings = PipelineSettings { seed, ..PipelineSettings::default() };
    let start = Instant::now();
    let data = prepare(&corpus.records, &settings).unwrap();
    let run = cross_validate(&data, &settings, threads).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut log = Vec::new();
    write_prediction_log(&run.predictions, &mut log).unwrap();
    let digest = sha256_hex(format!("{}{}", corpus_digest(&corpus.records), sha256_hex(&log)).as_bytes());
    (corpus.records, settings, run, secs, digest)
}

fn study() -> &'static [SeedStudy] {
    static STUDY: OnceLock<Vec<SeedStudy>> = OnceLock::new();
    STUDY.get_or_init(|| {
        let threads = thread_count().unwrap();
        SEEDS
            .iter()
            .map(|&seed| {
                let (records, settings, main, cv_seconds, digest) = pipeline(seed, threads);
                let data = prepare(&records, &settings).unwrap();
                let mut runs = vec![main.clone()];
                let mut variants = Vec::new();
                for (name, s) in preprocessing_settings(&settings) {
                    let run = if s == settings { main.clone() } else { cross_validate(&data, &s, threads).unwrap() };
                    variants.push((name, run.predictions.clone()));
                    runs.push(run);
                }
                let report = build_report(&main.predictions, settings.decision_threshold, &variants, &[]).unwrap();
                SeedStudy { seed, cv_seconds, report, runs, digest }
            })
            .collect()
    })
}

fn model<'a>(r: &'a MetricsReport, name: &str) -> &'a fraudlab_core::eval::ModelSummary {
    r.models.iter().find(|m| m.name == name).unwrap()
}

#[test]
fn criterion_07_scaled_end_to_end() {
    let s = study();
    let mut margins = Vec::new();
    let mut recalls = Vec::new();
    let mut lines = Vec::new();
    for st in s {
        let (moe, lstm, tf) = (model(&st.report, "moe"), model(&st.report, "lstm"), model(&st.report, "transformer"));
        margins.push(moe.f1.mean - lstm.f1.mean.max(tf.f1.mean));
        recalls.push(moe.recall.mean);
        lines.push(format!(
            "seed {} moe f1 {:.3} lstm {:.3} tf {:.3} recall {:.3} ({:.0}s)",
            st.seed, moe.f1.mean, lstm.f1.mean, tf.f1.mean, moe.recall.mean, st.cv_seconds
        ));
    }
    let (margin, recall) = (median(margins), median(recalls));
    let secs = s[0].cv_seconds;
    verdict(
        7,
        "scaled end-to-end",
        margin >= -0.02 && recall >= 0.75 && secs <= 600.0,
        &format!(
            "median f1 margin {margin:+.3} (>= -0.02), median recall {recall:.3} (>= 0.75), seed-42 5-fold run {secs:.0}s (<= 600s); {}",
            lines.join("; ")
        ),
    );
}

#[test]
fn criterion_08_ablation_direction() {
    let drops: Vec<f64> = study()
        .iter()
        .map(|st| st.report.ablation.iter().find(|a| a.removed == ExpertKind::Autoencoder).unwrap().structural_recall_drop)
        .collect();
    let m = median(drops.clone());
    verdict(8, "ablation direction", m > 0.0, &format!("structural recall drop without autoencoder {drops:.3?}, median {m:.3} (> 0)"));
}

#[test]
fn criterion_09_entropy_regularization() {
    let pairs: Vec<(f64, f64)> = study()
        .iter()
        .map(|st| {
            let e = st.report.entropy.as_ref().unwrap();
            (e.mean_entropy, e.mean_entropy_unregularized)
        })
        .collect();
    let pass = pairs.iter().all(|(reg, unreg)| reg > unreg);
    verdict(9, "entropy regularization", pass, &format!("mean gate entropy (lambda 0.01, lambda 0) per seed {pairs:.4?}"));
}

#[test]
fn criterion_10_preprocessing_comparison() {
    let s = study();
    let f1 = |name: &str| -> Vec<f64> {
        s.iter().map(|st| st.report.preprocessing.iter().find(|v| v.name == name).unwrap().summary.f1.mean).collect()
    };
    let complete = s.iter().all(|st| st.report.preprocessing.len() == 3);
    let (without, with) = (f1("without_normalization"), f1("with_normalization"));
    let smote = f1("with_normalization_smote");
    let (mw, mn) = (median(with.clone()), median(without.clone()));
    verdict(
        10,
        "preprocessing comparison",
        complete && mw >= mn,
        &format!("f1 without normalization {without:.3?}, with {with:.3?}, with SMOTE {smote:.3?}; medians {mn:.3} vs {mw:.3}"),
    );
}

#[test]
fn criterion_11_freeze_contract() {
    let folds: Vec<_> = study().iter().flat_map(|st| st.runs.iter().flat_map(|r| r.folds.iter())).collect();
    let intact = folds.iter().filter(|f| f.experts_before_gate == f.experts_after_gate).count();
    verdict(11, "freeze contract", intact == folds.len(), &format!("{intact}/{} fold digests unchanged by gate training", folds.len()));
}

#[test]
fn criterion_12_reproducibility() {
    let first = &study()[0];
    let threads = thread_count().unwrap() % 5 + 1;
    let (_, _, _, _, digest) = pipeline(first.seed, threads);
    verdict(
        12,
        "reproducibility",
        digest == first.digest,
        &format!("seed {} pipeline digest {} vs rerun on {threads} threads {}", first.seed, &first.digest[..16], &digest[..16]),
    );
}
