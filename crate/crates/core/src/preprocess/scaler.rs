use alloc::vec::Vec;

use super::frame::FeatureFrame;
use crate::error::{Error, Result};

/// Per-column minimum and maximum over the fit split.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalerStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

pub fn minmax_fit(frame: &FeatureFrame, fit_rows: &[usize]) -> Result<ScalerStats> {
    if fit_rows.is_empty() {
        return Err(Error::Empty("fit rows"));
    }
    let d = frame.width();
    let mut min = alloc::vec![f64::INFINITY; d];
    let mut max = alloc::vec![f64::NEG_INFINITY; d];
    for &r in fit_rows {
        for (j, &v) in frame.row(r).iter().enumerate() {
            min[j] = min[j].min(v);
            max[j] = max[j].max(v);
        }
    }
    Ok(ScalerStats { min, max })
}

impl ScalerStats {
    /// Scale one value of column `j`. Constant columns map to 0; values
    /// outside the fit range are not clamped.
    pub fn scale(&self, j: usize, v: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            (v - self.min[j]) / range
        } else {
            0.0
        }
    }

    pub fn scale_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = self.scale(j, *v);
        }
    }
}

pub fn minmax_apply(stats: &ScalerStats, frame: &FeatureFrame) -> Result<FeatureFrame> {
    if stats.min.len() != frame.width() {
        return Err(Error::WidthMismatch { expected: stats.min.len(), got: frame.width() });
    }
    let mut out = frame.clone();
    for row in out.data.chunks_mut(frame.width()) {
        stats.scale_row(row);
    }
    Ok(out)
}
