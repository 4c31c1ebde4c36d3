use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{Adam, AdamConfig, Graph, Tensor, Var};
use crate::rng::{rng, shuffle};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    /// Upper bound on minibatches drawn per epoch; `None` means a full pass.
    pub batches_per_epoch: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 128,
            max_epochs: 50,
            patience: 5,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            batches_per_epoch: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be at least 1"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::invalid("batch size and epoch count must be positive"));
        }
        if self.batches_per_epoch == Some(0) {
            return Err(Error::invalid("batches per epoch must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("moment decay rates must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub validation: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    pub epochs: Vec<EpochLoss>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_validation: f64,
    pub stopped_early: bool,
}

/// Minibatch Adam over `params` with early stopping on validation loss.
///
/// `batch_loss` builds a scalar loss for the given training indices with the
/// parameters bound as graph leaves; `validation_loss` evaluates a candidate
/// parameter set. On return `params` holds the best-validation epoch.
pub fn train_params<L, V>(
    params: &mut Vec<Tensor>,
    n_train: usize,
    cfg: &TrainConfig,
    mut batch_loss: L,
    mut validation_loss: V,
) -> Result<TrainReport>
where
    L: FnMut(&mut Graph, &[Var], &[usize]) -> Result<Var>,
    V: FnMut(&[Tensor]) -> Result<f64>,
{
    cfg.validate()?;
    if n_train == 0 {
        return Err(Error::Empty("training split"));
    }
    let mut adam = Adam::new(
        AdamConfig { learning_rate: cfg.learning_rate, beta1: cfg.beta1, beta2: cfg.beta2, ..AdamConfig::default() },
        params,
    );
    let mut r = rng(cfg.seed);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut best = params.clone();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        shuffle(&mut order, &mut r);
        let mut total = 0.0;
        let mut count = 0;
        for chunk in order.chunks(cfg.batch_size).take(cfg.batches_per_epoch.unwrap_or(usize::MAX)) {
            let mut g = Graph::new();
            let vars: Vec<Var> = params.iter().map(|t| g.param(t.clone())).collect();
            let loss = batch_loss(&mut g, &vars, chunk)?;
            let value = g.value(loss).item();
            if !value.is_finite() {
                return Err(Error::Diverged { epoch, detail: alloc::format!("training loss {value}") });
            }
            let mut grads = g.backward(loss)?;
            let grads: Vec<Tensor> = vars.iter().map(|&v| grads.take(v)).collect();
            if grads.iter().any(|t| !t.all_finite()) {
                return Err(Error::Diverged { epoch, detail: "non-finite gradient".into() });
            }
            adam.step(params, &grads);
            total += value;
            count += 1;
        }
        let val = validation_loss(params)?;
        if !val.is_finite() {
            return Err(Error::Diverged { epoch, detail: alloc::format!("validation loss {val}") });
        }
        epochs.push(EpochLoss { epoch, train: total / count as f64, validation: val });
        if val < best_val {
            best_val = val;
            best_epoch = epoch;
            best.clone_from(params);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    *params = best;
    Ok(TrainReport { epochs, best_epoch, best_validation: best_val, stopped_early })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experts::{LstmConfig, LstmExpert, SequenceBatch, SequenceExpert};
    use alloc::vec;

    #[test]
    fn patience_one_stops_after_first_worse_epoch() {
        let mut params = vec![Tensor::vector(vec![1.0])];
        let cfg = TrainConfig { patience: 1, batch_size: 1, ..TrainConfig::default() };
        let mut calls = 0;
        let mut snapshots = Vec::new();
        let report = train_params(
            &mut params,
            1,
            &cfg,
            |g, p, _| Ok(g.sum(p[0])),
            |p| {
                calls += 1;
                snapshots.push(p[0].data()[0]);
                Ok(calls as f64)
            },
        )
        .unwrap();
        assert_eq!(report.epochs.len(), 2);
        assert_eq!(report.best_epoch, 1);
        assert!(report.stopped_early);
        assert_eq!(params[0].data()[0], snapshots[0]);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut params = vec![Tensor::vector(vec![-1.0])];
        let r = train_params(&mut params, 1, &TrainConfig::default(), |g, p, _| {
            let s = g.scale(p[0], f64::NAN);
            Ok(g.sum(s))
        }, |_| Ok(0.0));
        assert!(matches!(r, Err(Error::Diverged { epoch: 1, .. })));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(TrainConfig { patience: 0, ..TrainConfig::default() }.validate().is_err());
        assert!(TrainConfig { learning_rate: 0.0, ..TrainConfig::default() }.validate().is_err());
    }

    fn toy() -> SequenceBatch {
        // separable on the sign of the first feature of the last step
        let mut data = Vec::new();
        let mut targets = Vec::new();
        for i in 0..64 {
            let y = i % 2 == 0;
            let s = if y { 1.0 } else { -1.0 };
            let f = (i as f64 * 0.37).sin() * 0.3;
            data.extend_from_slice(&[f, 0.5, s * 0.8, f]);
            targets.push(if y { 1.0 } else { 0.0 });
        }
        SequenceBatch::new(64, 2, 2, data, vec![true; 128], targets).unwrap()
    }

    fn run(seed: u64) -> (LstmExpert, TrainReport) {
        let b = toy();
        let mut e = LstmExpert::new(LstmConfig { input_width: 2, hidden: 4 }, seed).unwrap();
        let cfg = TrainConfig { learning_rate: 0.02, batch_size: 64, max_epochs: 5, patience: 5, seed, ..TrainConfig::default() };
        let weights = vec![1.0; 64];
        let probe = e.clone();
        let mut params = e.params().to_vec();
        let report = train_params(
            &mut params,
            64,
            &cfg,
            |g, p, idx| {
                let sub = b.select(idx);
                let out = probe.forward_graph(g, p, &sub)?;
                Ok(g.weighted_bce(out, sub.targets.clone(), weights[..idx.len()].to_vec()))
            },
            |_| Ok(0.0),
        )
        .unwrap();
        *e.params_mut() = params;
        (e, report)
    }

    #[test]
    fn separable_toy_loss_decreases_and_is_deterministic() {
        let (a, report) = run(3);
        let losses: Vec<f64> = report.epochs.iter().map(|e| e.train).collect();
        assert_eq!(losses.len(), 5);
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
        let (b, _) = run(3);
        assert_eq!(a.params(), b.params());
    }
}
