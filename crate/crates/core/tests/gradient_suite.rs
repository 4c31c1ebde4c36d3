use fraudlab_core::experts::{
    AutoencoderConfig, AutoencoderExpert, LstmConfig, LstmExpert, RowBatch, SequenceBatch, SequenceExpert,
    TransformerConfig, TransformerExpert,
};
use fraudlab_core::moe::{gate_objective, GateData, EXPERT_COUNT};
use fraudlab_core::numerics::{gradient_check, Tensor};
use fraudlab_core::rng::rng;
use rand::Rng;

const CONFIGS: u64 = 20;
const STEP: f64 = 1e-6;
const TOLERANCE: f64 = 1e-4;

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

fn check_sequence_expert(e: &dyn SequenceExpert, batch: &SequenceBatch, weights: Vec<f64>) -> f64 {
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

#[test]
fn lstm_gradients_match_finite_differences() {
    for seed in 0..CONFIGS {
        let mut r = rng(seed);
        let (width, hidden) = (r.random_range(1..5), r.random_range(1..5));
        let (n, steps) = (r.random_range(1..4), r.random_range(1..5));
        let batch = random_batch(&mut r, n, steps, width);
        let e = LstmExpert::new(LstmConfig { input_width: width, hidden }, seed).unwrap();
        let weights = (0..batch.batch).map(|_| r.random_range(0.5..3.0)).collect();
        let err = check_sequence_expert(&e, &batch, weights);
        assert!(err < TOLERANCE, "seed {seed}: {err}");
    }
}

#[test]
fn transformer_gradients_match_finite_differences() {
    for seed in 0..CONFIGS {
        let mut r = rng(100 + seed);
        let heads = r.random_range(1..3);
        let d_model = heads * r.random_range(1..4);
        let (width, window) = (r.random_range(1..4), r.random_range(1..5));
        let cfg = TransformerConfig { input_width: width, window, d_model, heads, ffn: r.random_range(1..6) };
        let e = TransformerExpert::new(cfg, seed).unwrap();
        let n = r.random_range(1..4);
        let batch = random_batch(&mut r, n, window, width);
        let weights = (0..batch.batch).map(|_| r.random_range(0.5..3.0)).collect();
        let err = check_sequence_expert(&e, &batch, weights);
        assert!(err < TOLERANCE, "seed {seed}: {err}");
    }
}

#[test]
fn autoencoder_gradients_match_finite_differences() {
    for seed in 0..CONFIGS {
        let mut r = rng(200 + seed);
        let width = r.random_range(2..7);
        let bottleneck = r.random_range(1..width);
        let cfg = AutoencoderConfig { input_width: width, hidden: r.random_range(1..6), bottleneck };
        let e = AutoencoderExpert::new(cfg, seed).unwrap();
        let n = r.random_range(1..5);
        let rows = RowBatch::new(width, (0..n * width).map(|_| r.random_range(0.0..1.0)).collect(), vec![0.0; n]).unwrap();
        let err = gradient_check(|g, p| e.loss_graph(g, p, &rows), e.params(), STEP).unwrap();
        assert!(err < TOLERANCE, "seed {seed}: {err}");
    }
}

#[test]
fn gate_gradients_match_finite_differences() {
    for seed in 0..CONFIGS {
        let mut r = rng(300 + seed);
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
        let params = [
            Tensor::new(vec![width, EXPERT_COUNT], (0..width * EXPERT_COUNT).map(|_| r.random_range(-1.0..1.0)).collect())
                .unwrap(),
            Tensor::vector((0..EXPERT_COUNT).map(|_| r.random_range(-1.0..1.0)).collect()),
        ];
        let err = gradient_check(|g, p| Ok(gate_objective(g, p[0], p[1], &data, active, lambda, (4.0, 0.6))), &params, STEP)
            .unwrap();
        assert!(err < TOLERANCE, "seed {seed}: {err}");
    }
}
