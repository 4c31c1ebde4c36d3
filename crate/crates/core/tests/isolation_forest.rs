use fraudlab_core::datagen::IsolationForest;
use fraudlab_core::rng::rng;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const DIMS: usize = 4;
const INLIERS: usize = 500;

/// One trial: standard-normal inliers plus a point ten standard deviations
/// out along a random direction. Returns whether the outlier outscores the
/// inliers' 95th percentile.
fn trial(seed: u64) -> bool {
    let mut r = rng(seed);
    let mut data: Vec<f64> = (0..INLIERS * DIMS).map(|_| StandardNormal.sample(&mut r)).collect();
    let dir: Vec<f64> = (0..DIMS).map(|_| StandardNormal.sample(&mut r)).collect();
    let norm = dir.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
    let outlier: Vec<f64> = dir.iter().map(|v| 10.0 * v / norm).collect();
    let at = r.random_range(0..INLIERS);
    data.splice(at * DIMS..at * DIMS, outlier.iter().copied());

    let forest = IsolationForest::fit(&data, DIMS, 100, 256, seed ^ 0xabcd).unwrap();
    let scores = forest.score_rows(&data).unwrap();
    let mut inliers: Vec<f64> = scores.iter().enumerate().filter(|(i, _)| *i != at).map(|(_, s)| *s).collect();
    inliers.sort_by(f64::total_cmp);
    let p95 = inliers[(inliers.len() as f64 * 0.95) as usize];
    scores[at] > p95
}

#[test]
fn planted_outlier_outscores_inliers() {
    let hits = (0..100).filter(|&s| trial(s)).count();
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn scores_are_deterministic_and_bounded() {
    let data: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
    let a = IsolationForest::fit(&data, 2, 50, 64, 3).unwrap().score_rows(&data).unwrap();
    let b = IsolationForest::fit(&data, 2, 50, 64, 3).unwrap().score_rows(&data).unwrap();
    assert_eq!(a, b);
    assert!(a.iter().all(|s| *s > 0.0 && *s < 1.0));
}
