use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::frame::FeatureFrame;

pub const DEFAULT_WINDOW: usize = 10;
pub const DEFAULT_LOOKBACK_DAYS: u32 = 30;

/// One transaction and its same-card predecessors, oldest first. `rows`
/// holds frame row indices; `None` marks left padding.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceWindow {
    pub cardholder_id: u64,
    pub rows: Vec<Option<usize>>,
    pub label: bool,
}

impl SequenceWindow {
    /// Window of length `w` holding only `row`.
    pub fn single(frame: &FeatureFrame, row: usize, w: usize) -> Self {
        let mut rows = alloc::vec![None; w];
        rows[w - 1] = Some(row);
        SequenceWindow { cardholder_id: frame.meta.cardholder_ids[row], rows, label: frame.meta.labels[row] }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Final (current) transaction.
    pub fn last_row(&self) -> Option<usize> {
        self.rows.last().copied().flatten()
    }

    /// `true` for real steps, `false` for padding.
    pub fn mask(&self) -> Vec<bool> {
        self.rows.iter().map(Option::is_some).collect()
    }

    pub fn padding(&self) -> usize {
        self.rows.iter().filter(|r| r.is_none()).count()
    }

    /// Materialise as a `len × width` row-major block, zeros for padding.
    pub fn features(&self, frame: &FeatureFrame) -> Vec<f64> {
        let d = frame.width();
        let mut out = alloc::vec![0.0; self.rows.len() * d];
        for (t, r) in self.rows.iter().enumerate() {
            if let Some(r) = r {
                out[t * d..(t + 1) * d].copy_from_slice(frame.row(*r));
            }
        }
        out
    }
}

/// One window per frame row, in row order: the row plus up to `w - 1`
/// earlier rows of the same card no older than `lookback_hours`.
pub fn build_sequences(frame: &FeatureFrame, w: usize, lookback_hours: Option<f64>) -> Vec<SequenceWindow> {
    let w = w.max(1);
    let meta = &frame.meta;
    let mut by_card: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for i in 0..frame.rows() {
        by_card.entry(meta.cardholder_ids[i]).or_default().push(i);
    }
    let mut out: Vec<Option<SequenceWindow>> = alloc::vec![None; frame.rows()];
    for (card, mut rows) in by_card {
        rows.sort_by(|&a, &b| meta.times[a].total_cmp(&meta.times[b]).then(a.cmp(&b)));
        for (pos, &i) in rows.iter().enumerate() {
            let start = pos.saturating_sub(w - 1);
            let history: Vec<usize> = rows[start..=pos]
                .iter()
                .copied()
                .filter(|&j| lookback_hours.is_none_or(|h| meta.times[i] - meta.times[j] <= h))
                .collect();
            let mut window = alloc::vec![None; w - history.len()];
            window.extend(history.into_iter().map(Some));
            out[i] = Some(SequenceWindow { cardholder_id: card, rows: window, label: meta.labels[i] });
        }
    }
    out.into_iter().map(|w| w.expect("every row belongs to a card")).collect()
}
