//! Shapley attributions for forest predictions.
//!
//! Values are interventional: the game for a coalition `S` is the mean model
//! output over background rows `z` with the columns in `S` overwritten by `x`.
//! [`tree_shap`] computes them exactly in polynomial time; [`brute_force_shap`]
//! enumerates every coalition and serves as its oracle.

mod brute;
mod importance;
mod plots;
mod treeshap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use brute::{brute_force_shap, BRUTE_FORCE_MAX_COLUMNS};
pub use importance::{global_importance, prune_features, FeatureImportance, ImportanceReport, PruneResult};
pub use plots::{
    plot_payload, BeeswarmPoint, BeeswarmRow, DecisionPath, DependencePoint, ForceSegment, PlotKind, PlotPayload,
    WaterfallStep,
};
pub use treeshap::{tree_shap, tree_shap_columns, tree_shap_single};

use crate::casegen::{EncodingMap, FeatureKind, FeatureValue};
use crate::error::ExplainError;
use crate::models::FeatureMatrix;

pub const DEFAULT_BACKGROUND_SIZE: usize = 64;
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-5;

/// Reference rows defining the "feature absent" distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSet {
    pub rows: Vec<Vec<f64>>,
    /// Training-set row indices the rows were drawn from, when sampled.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub source_rows: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl BackgroundSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, ExplainError> {
        let Some(first) = rows.first() else {
            return Err(ExplainError::EmptyBackground);
        };
        let d = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(ExplainError::Dimension { expected: d, got: bad.len() });
        }
        Ok(Self { rows, source_rows: Vec::new(), seed: None })
    }

    /// `size` rows drawn without replacement (all rows if fewer), kept in
    /// their original order.
    pub fn sample_from(data: &FeatureMatrix, size: usize, seed: u64) -> Result<Self, ExplainError> {
        if data.is_empty() || size == 0 {
            return Err(ExplainError::EmptyBackground);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, data.n_rows(), size.min(data.n_rows())).into_vec();
        idx.sort_unstable();
        let rows = idx.iter().map(|&i| data.row(i).to_vec()).collect();
        Ok(Self { rows, source_rows: idx, seed: Some(seed) })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub(crate) fn check(&self, d: usize) -> Result<(), ExplainError> {
        if self.is_empty() {
            return Err(ExplainError::EmptyBackground);
        }
        if self.dim() != d {
            return Err(ExplainError::Dimension { expected: d, got: self.dim() });
        }
        Ok(())
    }
}

/// Shapley values per encoded column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnShap {
    pub base_value: f64,
    pub prediction: f64,
    pub values: Vec<f64>,
}

impl ColumnShap {
    pub fn additivity_error(&self) -> f64 {
        (self.base_value + self.values.iter().sum::<f64>() - self.prediction).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureContribution {
    pub feature: String,
    pub value: FeatureValue,
    /// Position on a numeric axis: the number itself, 0/1, or category index.
    pub coordinate: f64,
    pub shap: f64,
}

/// Attribution of one prediction to raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub base_value: f64,
    pub prediction: f64,
    /// One entry per encoded raw feature, in encoding order.
    pub contributions: Vec<FeatureContribution>,
    pub column_shap: Vec<f64>,
}

impl Explanation {
    /// Sums one-hot columns back into their raw feature.
    pub fn from_columns(shap: &ColumnShap, encoding: &EncodingMap, x: &[f64]) -> Result<Self, ExplainError> {
        if x.len() != encoding.dim() || shap.values.len() != encoding.dim() {
            return Err(ExplainError::Dimension { expected: encoding.dim(), got: x.len().min(shap.values.len()) });
        }
        let decoded = encoding.decode(x)?;
        let contributions = encoding
            .features
            .iter()
            .map(|f| {
                let value = decoded[&f.id].clone();
                let coordinate = match (f.kind, &value) {
                    (FeatureKind::Categorical, FeatureValue::Category(c)) => {
                        f.categories.iter().position(|k| k == c).unwrap_or(0) as f64
                    }
                    _ => x[f.offset],
                };
                FeatureContribution {
                    feature: f.id.clone(),
                    value,
                    coordinate,
                    shap: shap.values[f.offset..f.offset + f.width].iter().sum(),
                }
            })
            .collect();
        Ok(Self {
            base_value: shap.base_value,
            prediction: shap.prediction,
            contributions,
            column_shap: shap.values.clone(),
        })
    }

    pub fn contribution(&self, feature: &str) -> Option<f64> {
        self.contributions.iter().find(|c| c.feature == feature).map(|c| c.shap)
    }

    pub fn additivity_error(&self) -> f64 {
        (self.base_value + self.contributions.iter().map(|c| c.shap).sum::<f64>() - self.prediction).abs()
    }

    /// Contributions by descending `|φ|`, ties by feature id.
    pub fn ranked(&self) -> Vec<&FeatureContribution> {
        let mut v: Vec<&FeatureContribution> = self.contributions.iter().collect();
        v.sort_by(|a, b| b.shap.abs().total_cmp(&a.shap.abs()).then_with(|| a.feature.cmp(&b.feature)));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn background_sampling() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64]).collect();
        let m = FeatureMatrix::from_rows(rows, vec![0.0; 100], vec![]).unwrap();
        let bg = BackgroundSet::sample_from(&m, 64, 3).unwrap();
        assert_eq!(bg.len(), 64);
        assert!(bg.source_rows.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(bg, BackgroundSet::sample_from(&m, 64, 3).unwrap());
        assert_eq!(BackgroundSet::sample_from(&m, 500, 3).unwrap().len(), 100);
        assert!(matches!(BackgroundSet::new(vec![]), Err(ExplainError::EmptyBackground)));
        assert!(BackgroundSet::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
