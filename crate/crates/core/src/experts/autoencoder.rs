use alloc::vec::Vec;

use super::batch::RowBatch;
use super::{named, ExpertKind, PREDICT_CHUNK};
use crate::error::{Error, Result};
use crate::numerics::{glorot_uniform, Graph, Tensor, Var};
use crate::rng::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AutoencoderConfig {
    pub input_width: usize,
    pub hidden: usize,
    pub bottleneck: usize,
}

impl AutoencoderConfig {
    /// `d -> 16 -> 8 -> 16 -> d`.
    pub fn with_defaults(input_width: usize) -> Self {
        AutoencoderConfig { input_width, hidden: 16, bottleneck: 8 }
    }
}

pub const AUTOENCODER_PARAM_NAMES: [&str; 8] =
    ["w_enc1", "b_enc1", "w_enc2", "b_enc2", "w_dec1", "b_dec1", "w_dec2", "b_dec2"];

/// Map a reconstruction error to `[0, 1]`: half from the error relative to
/// the threshold, half from whether it crosses it.
pub fn ae_probability(error: f64, tau: f64) -> f64 {
    let ratio = if tau > 0.0 {
        (error / tau).min(1.0)
    } else if error > 0.0 {
        1.0
    } else {
        0.0
    };
    0.5 * ratio + if error > tau { 0.5 } else { 0.0 }
}

/// Bottleneck autoencoder with tanh hidden layers and a linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderExpert {
    pub config: AutoencoderConfig,
    params: Vec<Tensor>,
    threshold: Option<f64>,
    view: Option<Vec<usize>>,
}

impl AutoencoderExpert {
    pub fn new(config: AutoencoderConfig, seed: u64) -> Result<Self> {
        let AutoencoderConfig { input_width: d, hidden: h, bottleneck: b } = config;
        if d == 0 || h == 0 || b == 0 {
            return Err(Error::invalid("autoencoder widths must be positive"));
        }
        if b >= d {
            return Err(Error::invalid(alloc::format!("bottleneck {b} must be narrower than the input width {d}")));
        }
        let mut r = rng(seed);
        let params = alloc::vec![
            glorot_uniform(d, h, &mut r),
            Tensor::zeros(&[h]),
            glorot_uniform(h, b, &mut r),
            Tensor::zeros(&[b]),
            glorot_uniform(b, h, &mut r),
            Tensor::zeros(&[h]),
            glorot_uniform(h, d, &mut r),
            Tensor::zeros(&[d]),
        ];
        Ok(AutoencoderExpert { config, params, threshold: None, view: None })
    }

    pub fn from_params(config: AutoencoderConfig, params: Vec<Tensor>, threshold: Option<f64>) -> Result<Self> {
        let e = AutoencoderExpert::new(config, 0)?;
        super::check_shapes(&e.params, &params)?;
        if threshold.is_some_and(|t| !t.is_finite() || t < 0.0) {
            return Err(Error::invalid("threshold must be finite and non-negative"));
        }
        Ok(AutoencoderExpert { config, params, threshold, view: None })
    }

    pub fn kind(&self) -> ExpertKind {
        ExpertKind::Autoencoder
    }

    pub fn input_width(&self) -> usize {
        self.config.input_width
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Vec<Tensor> {
        &mut self.params
    }

    pub fn named_params(&self) -> Vec<(&'static str, &Tensor)> {
        named(&AUTOENCODER_PARAM_NAMES, &self.params)
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn set_threshold(&mut self, tau: f64) -> Result<()> {
        if !tau.is_finite() || tau < 0.0 {
            return Err(Error::invalid("threshold must be finite and non-negative"));
        }
        self.threshold = Some(tau);
        Ok(())
    }

    /// Columns of a wider feature row this autoencoder reads, if any.
    pub fn view(&self) -> Option<&[usize]> {
        self.view.as_deref()
    }

    pub fn with_view(mut self, columns: Vec<usize>) -> Result<Self> {
        if columns.len() != self.config.input_width {
            return Err(Error::WidthMismatch { expected: self.config.input_width, got: columns.len() });
        }
        let mut sorted = columns.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != columns.len() {
            return Err(Error::invalid("autoencoder view repeats a column"));
        }
        self.view = Some(columns);
        Ok(self)
    }

    /// Project full feature rows onto the view; rows pass through unchanged
    /// when no view is set.
    pub fn view_rows(&self, rows: &RowBatch) -> Result<RowBatch> {
        match &self.view {
            Some(cols) => rows.columns(cols),
            None => Ok(rows.clone()),
        }
    }

    fn check(&self, rows: &RowBatch) -> Result<()> {
        if rows.width != self.config.input_width {
            return Err(Error::WidthMismatch { expected: self.config.input_width, got: rows.width });
        }
        Ok(())
    }

    pub fn reconstruction_graph(&self, g: &mut Graph, p: &[Var], rows: &RowBatch) -> Result<(Var, Var)> {
        self.check(rows)?;
        let x = g.constant(Tensor::new(alloc::vec![rows.batch, rows.width], rows.data.clone())?);
        let mut h = x;
        for layer in 0..4 {
            h = g.matmul(h, p[2 * layer]);
            h = g.add_tiled(h, p[2 * layer + 1]);
            if layer < 3 {
                h = g.tanh(h);
            }
        }
        Ok((x, h))
    }

    /// Per-row mean squared reconstruction error, `[batch, 1]`.
    pub fn error_graph(&self, g: &mut Graph, p: &[Var], rows: &RowBatch) -> Result<Var> {
        let (x, recon) = self.reconstruction_graph(g, p, rows)?;
        let neg = g.scale(x, -1.0);
        let diff = g.add(recon, neg);
        let sq = g.mul(diff, diff);
        let d = rows.width;
        let ones = g.constant(Tensor::full(&[d, 1], 1.0 / d as f64));
        Ok(g.matmul(sq, ones))
    }

    /// Mean reconstruction error over the batch (the training loss).
    pub fn loss_graph(&self, g: &mut Graph, p: &[Var], rows: &RowBatch) -> Result<Var> {
        let e = self.error_graph(g, p, rows)?;
        Ok(g.mean(e))
    }

    pub fn reconstruct(&self, rows: &RowBatch) -> Result<Vec<f64>> {
        self.check(rows)?;
        let mut g = Graph::new();
        let p: Vec<Var> = self.params.iter().map(|t| g.constant(t.clone())).collect();
        let (_, recon) = self.reconstruction_graph(&mut g, &p, rows)?;
        Ok(g.value(recon).data().to_vec())
    }

    pub fn reconstruction_errors(&self, rows: &RowBatch) -> Result<Vec<f64>> {
        self.check(rows)?;
        let mut out = Vec::with_capacity(rows.batch);
        let mut start = 0;
        while start < rows.batch {
            let len = PREDICT_CHUNK.min(rows.batch - start);
            let idx: Vec<usize> = (start..start + len).collect();
            let chunk = rows.select(&idx);
            let mut g = Graph::new();
            let p: Vec<Var> = self.params.iter().map(|t| g.constant(t.clone())).collect();
            let e = self.error_graph(&mut g, &p, &chunk)?;
            // exact zero when the reconstruction matches
            out.extend(g.value(e).data().iter().map(|v| v.max(0.0)));
            start += len;
        }
        Ok(out)
    }

    /// Pseudo-probabilities via [`ae_probability`]; needs a calibrated threshold.
    pub fn predict(&self, rows: &RowBatch) -> Result<Vec<f64>> {
        let tau = self.threshold.ok_or(Error::UntrainedExpert("autoencoder threshold"))?;
        Ok(self.reconstruction_errors(rows)?.into_iter().map(|e| ae_probability(e, tau)).collect())
    }

    pub fn flags(&self, rows: &RowBatch) -> Result<Vec<bool>> {
        let tau = self.threshold.ok_or(Error::UntrainedExpert("autoencoder threshold"))?;
        Ok(self.reconstruction_errors(rows)?.into_iter().map(|e| e > tau).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradient_check;
    use alloc::vec;

    #[test]
    fn bottleneck_must_compress() {
        assert!(AutoencoderExpert::new(AutoencoderConfig { input_width: 4, hidden: 4, bottleneck: 4 }, 0).is_err());
        assert!(AutoencoderExpert::new(AutoencoderConfig { input_width: 4, hidden: 4, bottleneck: 5 }, 0).is_err());
        assert!(AutoencoderExpert::new(AutoencoderConfig { input_width: 4, hidden: 3, bottleneck: 2 }, 0).is_ok());
    }

    #[test]
    fn zero_weights_and_input_give_zero_error() {
        let cfg = AutoencoderConfig { input_width: 4, hidden: 3, bottleneck: 2 };
        let zeros = AutoencoderExpert::new(cfg, 1).unwrap().params.iter().map(|t| Tensor::zeros(t.shape())).collect();
        let e = AutoencoderExpert::from_params(cfg, zeros, None).unwrap();
        let rows = RowBatch::new(4, vec![0.0; 8], vec![0.0, 0.0]).unwrap();
        assert_eq!(e.reconstruct(&rows).unwrap(), vec![0.0; 8]);
        assert_eq!(e.reconstruction_errors(&rows).unwrap(), vec![0.0, 0.0]);
        let rows = RowBatch::new(4, vec![1.0, 0.0, 0.0, 1.0], vec![0.0]).unwrap();
        assert_eq!(e.reconstruction_errors(&rows).unwrap(), vec![0.5]);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let e = AutoencoderExpert::new(AutoencoderConfig { input_width: 4, hidden: 3, bottleneck: 2 }, 1).unwrap();
        let rows = RowBatch::new(3, vec![0.0; 3], vec![0.0]).unwrap();
        assert!(e.reconstruction_errors(&rows).is_err());
    }

    #[test]
    fn prediction_needs_a_threshold() {
        let mut e = AutoencoderExpert::new(AutoencoderConfig { input_width: 4, hidden: 3, bottleneck: 2 }, 1).unwrap();
        let rows = RowBatch::new(4, vec![0.2; 4], vec![0.0]).unwrap();
        assert!(matches!(e.predict(&rows), Err(Error::UntrainedExpert(_))));
        e.set_threshold(1e9).unwrap();
        let p = e.predict(&rows).unwrap()[0];
        assert!((0.0..0.5).contains(&p));
    }

    #[test]
    fn probability_mapping() {
        assert_eq!(ae_probability(0.0, 1.0), 0.0);
        assert_eq!(ae_probability(0.5, 1.0), 0.25);
        assert_eq!(ae_probability(1.0, 1.0), 0.5);
        assert_eq!(ae_probability(1.5, 1.0), 1.0);
        assert_eq!(ae_probability(0.0, 0.0), 0.0);
        assert_eq!(ae_probability(0.1, 0.0), 1.0);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let e = AutoencoderExpert::new(AutoencoderConfig { input_width: 4, hidden: 3, bottleneck: 2 }, 7).unwrap();
        let rows = RowBatch::new(4, vec![0.1, 0.9, 0.4, 0.0, 0.7, 0.2, 1.0, 0.3], vec![0.0, 0.0]).unwrap();
        let err = gradient_check(|g, p| e.loss_graph(g, p, &rows), e.params(), 1e-6).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn view_must_match_width_and_be_distinct() {
        let cfg = AutoencoderConfig { input_width: 2, hidden: 2, bottleneck: 1 };
        assert!(AutoencoderExpert::new(cfg, 0).unwrap().with_view(vec![0]).is_err());
        assert!(AutoencoderExpert::new(cfg, 0).unwrap().with_view(vec![1, 1]).is_err());
        let e = AutoencoderExpert::new(cfg, 0).unwrap().with_view(vec![2, 0]).unwrap();
        let rows = RowBatch::new(3, vec![1.0, 2.0, 3.0], vec![0.0]).unwrap();
        assert_eq!(e.view_rows(&rows).unwrap().data, vec![3.0, 1.0]);
        assert!(e.reconstruction_errors(&rows).is_err());
        assert!(e.reconstruction_errors(&e.view_rows(&rows).unwrap()).is_ok());
    }
}
