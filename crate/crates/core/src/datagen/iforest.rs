use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::{derive_seed, rng, Rng};

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
enum Node {
    Split { feature: usize, value: f64, left: usize, right: usize },
    Leaf { size: usize },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
struct Tree {
    nodes: Vec<Node>,
}

/// Isolation Forest over dense rows.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IsolationForest {
    trees: Vec<Tree>,
    n_features: usize,
    subsample_size: usize,
    depth_limit: usize,
    normalizer: f64,
}

/// Average unsuccessful-search path length in a binary search tree of `n` keys.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let harmonic: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
            2.0 * harmonic - 2.0 * (n - 1) as f64 / n as f64
        }
    }
}

impl IsolationForest {
    /// Fit on a row-major `data` matrix with `n_features` columns.
    pub fn fit(
        data: &[f64],
        n_features: usize,
        tree_count: usize,
        subsample_size: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_features == 0 || data.len() % n_features != 0 {
            return Err(Error::ShapeMismatch { shape: alloc::vec![data.len() / n_features.max(1), n_features], len: data.len() });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteValue);
        }
        let rows = data.len() / n_features;
        if tree_count == 0 {
            return Err(Error::invalid("tree_count must be at least 1"));
        }
        if subsample_size < 2 || subsample_size > rows {
            return Err(Error::invalid(alloc::format!(
                "subsample_size {subsample_size} must lie in [2, {rows}]"
            )));
        }
        let depth_limit = math::ceil(math::log2(subsample_size as f64)) as usize;
        let trees = (0..tree_count)
            .map(|t| {
                let mut r = rng(derive_seed(seed, t as u64));
                let mut idx: Vec<usize> = (0..rows).collect();
                for i in 0..subsample_size {
                    let j = r.random_range(i..rows);
                    idx.swap(i, j);
                }
                idx.truncate(subsample_size);
                build_tree(data, n_features, idx, depth_limit, &mut r)
            })
            .collect();
        Ok(IsolationForest {
            trees,
            n_features,
            subsample_size,
            depth_limit,
            normalizer: average_path_length(subsample_size),
        })
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn subsample_size(&self) -> usize {
        self.subsample_size
    }

    pub fn depth_limit(&self) -> usize {
        self.depth_limit
    }

    /// Deepest leaf over all trees.
    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(|t| t.depth(0)).max().unwrap_or(0)
    }

    /// Mean path length of `x` across the trees.
    pub fn expected_path_length(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::WidthMismatch { expected: self.n_features, got: x.len() });
        }
        Ok(self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64)
    }

    /// Anomaly score `2^(-E[h(x)] / c(psi))`, in (0, 1).
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let h = self.expected_path_length(x)?;
        Ok(math::powf(2.0, -h / self.normalizer))
    }

    pub fn score_rows(&self, data: &[f64]) -> Result<Vec<f64>> {
        if data.len() % self.n_features != 0 {
            return Err(Error::WidthMismatch { expected: self.n_features, got: data.len() % self.n_features });
        }
        data.chunks(self.n_features).map(|row| self.score(row)).collect()
    }
}

impl Tree {
    fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0usize;
        loop {
            match &self.nodes[node] {
                Node::Split { feature, value, left, right } => {
                    node = if x[*feature] < *value { *left } else { *right };
                    depth += 1;
                }
                Node::Leaf { size } => return depth as f64 + average_path_length(*size),
            }
        }
    }

    fn depth(&self, node: usize) -> usize {
        match &self.nodes[node] {
            Node::Split { left, right, .. } => 1 + self.depth(*left).max(self.depth(*right)),
            Node::Leaf { .. } => 0,
        }
    }
}

fn build_tree(data: &[f64], d: usize, idx: Vec<usize>, depth_limit: usize, r: &mut Rng) -> Tree {
    let mut nodes = Vec::new();
    grow(data, d, idx, 0, depth_limit, r, &mut nodes);
    Tree { nodes }
}

fn grow(
    data: &[f64],
    d: usize,
    idx: Vec<usize>,
    depth: usize,
    depth_limit: usize,
    r: &mut Rng,
    nodes: &mut Vec<Node>,
) -> usize {
    let me = nodes.len();
    nodes.push(Node::Leaf { size: idx.len() });
    if idx.len() <= 1 || depth >= depth_limit {
        return me;
    }
    let ranges: Vec<(usize, f64, f64)> = (0..d)
        .filter_map(|f| {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let v = data[i * d + f];
                (lo.min(v), hi.max(v))
            });
            (hi > lo).then_some((f, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return me;
    }
    let (feature, lo, hi) = ranges[r.random_range(0..ranges.len())];
    let mut value = r.random_range(lo..hi);
    if value <= lo {
        value = lo + (hi - lo) * 0.5;
    }
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| data[i * d + feature] < value);
    let left = grow(data, d, left_idx, depth + 1, depth_limit, r, nodes);
    let right = grow(data, d, right_idx, depth + 1, depth_limit, r, nodes);
    nodes[me] = Node::Split { feature, value, left, right };
    me
}
