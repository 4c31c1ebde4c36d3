use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::{rng, shuffle};

pub const DEFAULT_SMOTE_K: usize = 5;

/// Where a synthetic sample came from: `base + u * (neighbor - base)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoteOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub u: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SmoteSamples {
    /// Row-major synthetic rows.
    pub data: Vec<f64>,
    pub origins: Vec<SmoteOrigin>,
}

impl SmoteSamples {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }
}

/// Indices of the `k` nearest rows to `i` (Euclidean, index tie-break).
pub fn nearest_neighbors(data: &[f64], d: usize, i: usize, k: usize) -> Vec<usize> {
    let n = data.len() / d;
    let xi = &data[i * d..(i + 1) * d];
    let mut dist: Vec<(f64, usize)> = (0..n)
        .filter(|&j| j != i)
        .map(|j| {
            let xj = &data[j * d..(j + 1) * d];
            (xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), j)
        })
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dist.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Synthesise exactly `target_count` minority rows. Base rows are used
/// round-robin over a seeded permutation, so each minority row seeds
/// either floor or ceil of `target_count / n` samples.
pub fn smote_oversample(minority: &[f64], d: usize, k: usize, target_count: usize, seed: u64) -> Result<SmoteSamples> {
    if target_count == 0 {
        return Ok(SmoteSamples::default());
    }
    if d == 0 || minority.len() % d != 0 {
        return Err(Error::WidthMismatch { expected: d, got: minority.len() % d.max(1) });
    }
    let n = minority.len() / d;
    if k == 0 || n <= k {
        return Err(Error::TooFewMinority { have: n, k });
    }
    let mut r = rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, &mut r);
    let mut neighbors: Vec<Option<Vec<usize>>> = alloc::vec![None; n];

    let mut out = SmoteSamples { data: Vec::with_capacity(target_count * d), origins: Vec::with_capacity(target_count) };
    for s in 0..target_count {
        let base = order[s % n];
        let nn = neighbors[base].get_or_insert_with(|| nearest_neighbors(minority, d, base, k));
        let neighbor = nn[r.random_range(0..nn.len())];
        let u: f64 = r.random();
        let (xb, xn) = (&minority[base * d..(base + 1) * d], &minority[neighbor * d..(neighbor + 1) * d]);
        out.data.extend(xb.iter().zip(xn).map(|(a, b)| a + u * (b - a)));
        out.origins.push(SmoteOrigin { base, neighbor, u });
    }
    Ok(out)
}

/// Synthetic rows needed to lift the minority class to `ratio` times the
/// majority count (never negative).
pub fn smote_deficit(n_minority: usize, n_majority: usize, ratio: f64) -> usize {
    let target = math::round(ratio * n_majority as f64) as usize;
    target.saturating_sub(n_minority)
}
