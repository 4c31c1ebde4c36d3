use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::preprocess::{FeatureFrame, SequenceWindow};

/// Windows stacked batch-major: `data` is `[batch, steps, width]`, `mask`
/// is `[batch, steps]` with `true` for real steps.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceBatch {
    pub batch: usize,
    pub steps: usize,
    pub width: usize,
    pub data: Vec<f64>,
    pub mask: Vec<bool>,
    pub targets: Vec<f64>,
}

impl SequenceBatch {
    pub fn new(
        batch: usize,
        steps: usize,
        width: usize,
        data: Vec<f64>,
        mask: Vec<bool>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != batch * steps * width {
            return Err(Error::ShapeMismatch { shape: alloc::vec![batch, steps, width], len: data.len() });
        }
        if mask.len() != batch * steps {
            return Err(Error::LengthMismatch(mask.len(), batch * steps));
        }
        if targets.len() != batch {
            return Err(Error::LengthMismatch(targets.len(), batch));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(SequenceBatch { batch, steps, width, data, mask, targets })
    }

    pub fn from_windows<'a>(
        frame: &FeatureFrame,
        windows: impl IntoIterator<Item = &'a SequenceWindow>,
    ) -> Result<Self> {
        let mut data = Vec::new();
        let mut mask = Vec::new();
        let mut targets = Vec::new();
        let mut steps = None;
        for w in windows {
            if *steps.get_or_insert(w.len()) != w.len() {
                return Err(Error::LengthMismatch(steps.unwrap_or(0), w.len()));
            }
            data.extend(w.features(frame));
            mask.extend(w.mask());
            targets.push(if w.label { 1.0 } else { 0.0 });
        }
        let steps = steps.ok_or(Error::Empty("window batch"))?;
        SequenceBatch::new(targets.len(), steps, frame.width(), data, mask, targets)
    }

    /// Items `start..start + len` as a new batch.
    pub fn slice(&self, start: usize, len: usize) -> SequenceBatch {
        let (s, d) = (self.steps, self.width);
        SequenceBatch {
            batch: len,
            steps: s,
            width: d,
            data: self.data[start * s * d..(start + len) * s * d].to_vec(),
            mask: self.mask[start * s..(start + len) * s].to_vec(),
            targets: self.targets[start..start + len].to_vec(),
        }
    }

    /// Items at `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> SequenceBatch {
        let (s, d) = (self.steps, self.width);
        let mut data = Vec::with_capacity(idx.len() * s * d);
        let mut mask = Vec::with_capacity(idx.len() * s);
        for &i in idx {
            data.extend_from_slice(&self.data[i * s * d..(i + 1) * s * d]);
            mask.extend_from_slice(&self.mask[i * s..(i + 1) * s]);
        }
        SequenceBatch { batch: idx.len(), steps: s, width: d, data, mask, targets: idx.iter().map(|&i| self.targets[i]).collect() }
    }

    /// `[steps, batch, width]` copy of the data.
    pub fn time_major(&self) -> Vec<f64> {
        let (b, s, d) = (self.batch, self.steps, self.width);
        let mut out = alloc::vec![0.0; b * s * d];
        for i in 0..b {
            for t in 0..s {
                out[(t * b + i) * d..(t * b + i + 1) * d].copy_from_slice(&self.data[(i * s + t) * d..(i * s + t + 1) * d]);
            }
        }
        out
    }

    /// Last step of every window as a `[batch, width]` block.
    pub fn final_rows(&self) -> Vec<f64> {
        let (s, d) = (self.steps, self.width);
        (0..self.batch).flat_map(|i| self.data[(i * s + s - 1) * d..(i * s + s) * d].iter().copied()).collect()
    }
}

/// Dense `[batch, width]` rows with binary targets.
#[derive(Clone, Debug, PartialEq)]
pub struct RowBatch {
    pub batch: usize,
    pub width: usize,
    pub data: Vec<f64>,
    pub targets: Vec<f64>,
}

impl RowBatch {
    pub fn new(width: usize, data: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if width == 0 || data.len() != width * targets.len() {
            return Err(Error::ShapeMismatch { shape: alloc::vec![targets.len(), width], len: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        Ok(RowBatch { batch: targets.len(), width, data, targets })
    }

    pub fn from_rows(frame: &FeatureFrame, rows: &[usize]) -> Result<Self> {
        let targets = rows.iter().map(|&r| if frame.meta.labels[r] { 1.0 } else { 0.0 }).collect();
        RowBatch::new(frame.width(), frame.gather(rows), targets)
    }

    pub fn select(&self, idx: &[usize]) -> RowBatch {
        let d = self.width;
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend_from_slice(&self.data[i * d..(i + 1) * d]);
        }
        RowBatch { batch: idx.len(), width: d, data, targets: idx.iter().map(|&i| self.targets[i]).collect() }
    }

    /// Keep only the listed columns, in the given order.
    pub fn columns(&self, cols: &[usize]) -> Result<RowBatch> {
        if cols.is_empty() {
            return Err(Error::Empty("column selection"));
        }
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.width) {
            return Err(Error::WidthMismatch { expected: self.width, got: bad + 1 });
        }
        let mut data = Vec::with_capacity(self.batch * cols.len());
        for row in self.data.chunks(self.width) {
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Ok(RowBatch { batch: self.batch, width: cols.len(), data, targets: self.targets.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn time_major_transposes_the_leading_axes() {
        // batch 2, steps 3, width 1
        let b = SequenceBatch::new(2, 3, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![true; 6], vec![0.0, 1.0])
            .unwrap();
        assert_eq!(b.time_major(), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
        assert_eq!(b.final_rows(), vec![3.0, 6.0]);
        assert_eq!(b.slice(1, 1).data, vec![4.0, 5.0, 6.0]);
        assert_eq!(b.select(&[1, 0]).targets, vec![1.0, 0.0]);
    }

    #[test]
    fn shapes_are_validated() {
        assert!(SequenceBatch::new(1, 2, 2, vec![0.0; 3], vec![true; 2], vec![0.0]).is_err());
        assert!(RowBatch::new(2, vec![0.0; 3], vec![0.0]).is_err());
        assert!(RowBatch::new(1, vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn column_projection_keeps_order_and_targets() {
        let rows = RowBatch::new(3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0.0, 1.0]).unwrap();
        let p = rows.columns(&[2, 0]).unwrap();
        assert_eq!((p.width, p.data.clone(), p.targets.clone()), (2, vec![3.0, 1.0, 6.0, 4.0], vec![0.0, 1.0]));
        assert!(rows.columns(&[3]).is_err());
        assert!(rows.columns(&[]).is_err());
    }
}
