//! Regression models predicting the reduction fraction, plus k-fold
//! cross-validation scored by mean absolute error.

mod baseline;
mod cv;
mod forest;
mod linear;
mod matrix;
mod mlp;
mod tree;

use serde::{Deserialize, Serialize};

pub use baseline::{constant_grid, fit_constant, fit_median, ConstantFit, ConstantModel, SweepPoint};
pub use cv::{cross_validate, kfold_split, CvReport, Fold};
pub use forest::{fit_forest, ForestParams, RandomForest};
pub use linear::{fit_linear, LinearModel};
pub use matrix::FeatureMatrix;
pub use mlp::{fit_mlp, parameter_count, AdamConfig, Mlp, MlpFit, MlpParams};
pub use tree::{fit_tree, DecisionTree, TreeNode, TreeParams};

use crate::digest::sha256_json;
use crate::error::ModelError;

/// Anything that maps an encoded row to a predicted fraction.
pub trait Regressor: Send + Sync {
    fn predict_row(&self, row: &[f64]) -> f64;

    fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Regressor for F {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self(row)
    }
}

/// Mean of absolute residuals.
pub fn mae(predictions: &[f64], labels: &[f64]) -> Result<f64, ModelError> {
    if predictions.len() != labels.len() {
        return Err(ModelError::LengthMismatch(predictions.len(), labels.len()));
    }
    if labels.is_empty() {
        return Err(ModelError::Empty);
    }
    let total: f64 = predictions.iter().zip(labels).map(|(p, y)| (p - y).abs()).sum();
    Ok(total / labels.len() as f64)
}

/// A trained model of any supported family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Constant(ConstantModel),
    Linear(LinearModel),
    Tree(DecisionTree),
    Forest(RandomForest),
    Mlp(Mlp),
}

impl Model {
    /// Digest of the serialized model; equal digests mean bit-identical models.
    pub fn digest(&self) -> String {
        sha256_json(self)
    }
}

impl Regressor for Model {
    fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            Self::Constant(m) => m.predict_row(row),
            Self::Linear(m) => m.predict_row(row),
            Self::Tree(m) => m.predict_row(row),
            Self::Forest(m) => m.predict_row(row),
            Self::Mlp(m) => m.predict_row(row),
        }
    }
}

/// Something cross-validation can retrain on each fold.
pub trait Trainer: Sync {
    fn name(&self) -> String;
    fn train(&self, data: &FeatureMatrix, seed: u64) -> Result<Box<dyn Regressor>, ModelError>;
}

/// Training recipe for each model family, with the defaults used throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Constant { step: f64 },
    Median,
    Linear,
    Tree(TreeParams),
    Forest(ForestParams),
    Mlp(MlpParams),
}

impl ModelSpec {
    /// The six families compared in evaluation, in report order.
    pub fn standard_suite(forest: ForestParams, mlp: MlpParams) -> Vec<ModelSpec> {
        vec![
            ModelSpec::Forest(forest.clone()),
            ModelSpec::Linear,
            ModelSpec::Mlp(mlp),
            ModelSpec::Tree(TreeParams { min_samples_split: forest.min_samples_split, ..TreeParams::default() }),
            ModelSpec::Constant { step: 0.01 },
            ModelSpec::Median,
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::Median => "median",
            Self::Linear => "linear",
            Self::Tree(_) => "tree",
            Self::Forest(_) => "forest",
            Self::Mlp(_) => "mlp",
        }
    }

    pub fn fit(&self, data: &FeatureMatrix, seed: u64) -> Result<Model, ModelError> {
        Ok(match self {
            Self::Constant { step } => Model::Constant(fit_constant(data.labels(), *step)?.model),
            Self::Median => Model::Constant(fit_median(data.labels())?),
            Self::Linear => Model::Linear(fit_linear(data)?),
            Self::Tree(p) => {
                let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
                Model::Tree(fit_tree(data, p, &mut rng)?)
            }
            Self::Forest(p) => Model::Forest(fit_forest(data, p, seed)?),
            Self::Mlp(p) => Model::Mlp(fit_mlp(data, p, seed)?.model),
        })
    }
}

impl Trainer for ModelSpec {
    fn name(&self) -> String {
        self.label().to_string()
    }

    fn train(&self, data: &FeatureMatrix, seed: u64) -> Result<Box<dyn Regressor>, ModelError> {
        Ok(Box::new(self.fit(data, seed)?))
    }
}

/// Independent stream seed derived from `(seed, stream)` (SplitMix64 mix).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[0.1, 0.7], &[0.1, 0.7]).unwrap(), 0.0);
        assert!((mae(&[0.2, 0.4], &[0.1, 0.5]).unwrap() - 0.1).abs() < 1e-15);
        assert!(matches!(mae(&[0.2], &[0.1, 0.5]), Err(ModelError::LengthMismatch(1, 2))));
        assert!(matches!(mae(&[], &[]), Err(ModelError::Empty)));
    }

    #[test]
    fn derived_seeds_differ_per_stream() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        let unique: std::collections::BTreeSet<_> = a.iter().collect();
        assert_eq!(unique.len(), 100);
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }
}
