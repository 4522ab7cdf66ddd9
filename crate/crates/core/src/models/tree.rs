use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Regressor};
use crate::error::ModelError;

/// Nodes whose label variance falls below this are leaves.
const PURE_VARIANCE: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    /// Columns drawn per split; `None` means all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { min_samples_split: 10, max_depth: None, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
        samples: usize,
    },
    /// Rows with `x[column] <= threshold` go left.
    Split {
        column: usize,
        threshold: f64,
        left: usize,
        right: usize,
        value: f64,
        samples: usize,
    },
}

impl TreeNode {
    /// Mean training label of the samples reaching the node.
    pub fn value(&self) -> f64 {
        match self {
            Self::Leaf { value, .. } | Self::Split { value, .. } => *value,
        }
    }

    pub fn samples(&self) -> usize {
        match self {
            Self::Leaf { samples, .. } | Self::Split { samples, .. } => *samples,
        }
    }
}

/// CART regression tree in a flat array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { .. } => return i,
                TreeNode::Split { column, threshold, left, right, .. } => {
                    i = if row[*column] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

impl Regressor for DecisionTree {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_index(row)].value()
    }
}

pub fn fit_tree<R: Rng + ?Sized>(
    data: &FeatureMatrix,
    params: &TreeParams,
    rng: &mut R,
) -> Result<DecisionTree, ModelError> {
    fit_tree_on(data, (0..data.n_rows()).collect(), params, rng)
}

/// Fits on the given row indices, which may repeat (bootstrap samples).
pub(crate) fn fit_tree_on<R: Rng + ?Sized>(
    data: &FeatureMatrix,
    mut indices: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
) -> Result<DecisionTree, ModelError> {
    if indices.is_empty() {
        return Err(ModelError::Empty);
    }
    if params.min_samples_split < 2 {
        return Err(ModelError::InvalidParam("min_samples_split must be at least 2".into()));
    }
    let d = data.n_cols();
    if let Some(m) = params.max_features {
        if m == 0 || m > d {
            return Err(ModelError::InvalidParam(format!("max_features {m} outside 1..={d}")));
        }
    }
    let mut b = Builder { data, params, rng, nodes: Vec::new(), pairs: Vec::with_capacity(indices.len()) };
    b.build(&mut indices, 0);
    Ok(DecisionTree { n_features: d, nodes: b.nodes })
}

struct Builder<'a, R: ?Sized> {
    data: &'a FeatureMatrix,
    params: &'a TreeParams,
    rng: &'a mut R,
    nodes: Vec<TreeNode>,
    pairs: Vec<(f64, f64)>,
}

struct Split {
    column: usize,
    threshold: f64,
    sse: f64,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let y = self.data.labels();
        let n = idx.len();
        let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
        let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| (a.min(y[i]), b.max(y[i])));
        let value = mean.clamp(lo, hi);
        let variance = idx.iter().map(|&i| (y[i] - mean).powi(2)).sum::<f64>() / n as f64;

        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value, samples: n });
        if n < self.params.min_samples_split
            || variance < PURE_VARIANCE
            || self.params.max_depth.is_some_and(|m| depth >= m)
        {
            return id;
        }
        let Some(split) = self.best_split(idx, mean) else {
            return id;
        };

        let mut left_rows: Vec<usize> = Vec::with_capacity(n);
        let mut right_rows: Vec<usize> = Vec::with_capacity(n);
        for &i in idx.iter() {
            if self.data.get(i, split.column) <= split.threshold {
                left_rows.push(i);
            } else {
                right_rows.push(i);
            }
        }
        let left = self.build(&mut left_rows, depth + 1);
        let right = self.build(&mut right_rows, depth + 1);
        self.nodes[id] = TreeNode::Split { column: split.column, threshold: split.threshold, left, right, value, samples: n };
        id
    }

    fn candidate_columns(&mut self) -> Vec<usize> {
        let d = self.data.n_cols();
        match self.params.max_features {
            Some(m) if m < d => {
                let mut cols = rand::seq::index::sample(self.rng, d, m).into_vec();
                cols.sort_unstable();
                cols
            }
            _ => (0..d).collect(),
        }
    }

    /// Lowest child SSE; ties keep the earlier column, then the lower threshold.
    fn best_split(&mut self, idx: &[usize], mean: f64) -> Option<Split> {
        let y = self.data.labels();
        let n = idx.len();
        let mut best: Option<Split> = None;
        for c in self.candidate_columns() {
            self.pairs.clear();
            // Centering on the node mean keeps the prefix sums well conditioned.
            self.pairs.extend(idx.iter().map(|&i| (self.data.get(i, c), y[i] - mean)));
            self.pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.pairs[0].0 == self.pairs[n - 1].0 {
                continue;
            }
            let (total_s, total_q) = self.pairs.iter().fold((0.0, 0.0), |(s, q), p| (s + p.1, q + p.1 * p.1));
            let (mut s, mut q) = (0.0, 0.0);
            for k in 1..n {
                let (a, ya) = self.pairs[k - 1];
                s += ya;
                q += ya * ya;
                let b = self.pairs[k].0;
                if a == b {
                    continue;
                }
                let (nl, nr) = (k as f64, (n - k) as f64);
                let (sr, qr) = (total_s - s, total_q - q);
                let sse = (q - s * s / nl) + (qr - sr * sr / nr);
                if best.as_ref().is_none_or(|bs| sse < bs.sse) {
                    let mid = 0.5 * (a + b);
                    let threshold = if mid < b { mid } else { a };
                    best = Some(Split { column: c, threshold, sse });
                }
            }
        }
        best
    }
}
