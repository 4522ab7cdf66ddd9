use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::fit_tree_on;
use super::{derive_seed, DecisionTree, FeatureMatrix, Regressor, TreeParams};
use crate::error::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_trees: 100, min_samples_split: 10, max_depth: None, max_features: None, bootstrap: true }
    }
}

impl ForestParams {
    fn tree_params(&self) -> TreeParams {
        TreeParams {
            min_samples_split: self.min_samples_split,
            max_depth: self.max_depth,
            max_features: self.max_features,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub n_features: usize,
    pub params: ForestParams,
    pub seed: u64,
    /// Seed of each tree's bootstrap and column draws.
    pub tree_seeds: Vec<u64>,
    /// Training label range; predictions never leave it.
    pub label_range: [f64; 2],
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn tree_predictions(&self, row: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict_row(row)).collect()
    }
}

impl Regressor for RandomForest {
    fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        // Clamping only absorbs last-bit rounding of the mean.
        (sum / self.trees.len() as f64).clamp(self.label_range[0], self.label_range[1])
    }
}

/// Trees train in parallel; each draws only from its own `(seed, index)`
/// stream, so the result does not depend on scheduling.
pub fn fit_forest(data: &FeatureMatrix, params: &ForestParams, seed: u64) -> Result<RandomForest, ModelError> {
    let n = data.n_rows();
    if n == 0 {
        return Err(ModelError::Empty);
    }
    if params.n_trees == 0 {
        return Err(ModelError::InvalidParam("n_trees must be positive".into()));
    }
    let tree_params = params.tree_params();
    let tree_seeds: Vec<u64> = (0..params.n_trees as u64).map(|t| derive_seed(seed, t)).collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let indices: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(data, indices, &tree_params, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let y = data.labels();
    let label_range = [
        y.iter().copied().fold(f64::INFINITY, f64::min),
        y.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    ];
    Ok(RandomForest { n_features: data.n_cols(), params: params.clone(), seed, tree_seeds, label_range, trees })
}
