use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{tree_shap, BackgroundSet, Explanation};
use crate::casegen::EncodingMap;
use crate::error::ExplainError;
use crate::models::{FeatureMatrix, RandomForest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_abs_shap: f64,
    pub share: f64,
}

/// Mean `|φ|` per raw feature, most important first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub n_rows: usize,
    pub total: f64,
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    /// Aggregates per-instance explanations sharing one encoding.
    pub fn from_explanations(explanations: &[Explanation]) -> Result<Self, ExplainError> {
        let first = explanations.first().ok_or(ExplainError::MissingInput("no explanations to aggregate"))?;
        let n = explanations.len() as f64;
        let mut features: Vec<FeatureImportance> = first
            .contributions
            .iter()
            .enumerate()
            .map(|(j, c)| FeatureImportance {
                feature: c.feature.clone(),
                mean_abs_shap: explanations.iter().map(|e| e.contributions[j].shap.abs()).sum::<f64>() / n,
                share: 0.0,
            })
            .collect();
        let total: f64 = features.iter().map(|f| f.mean_abs_shap).sum();
        if total > 0.0 {
            features.iter_mut().for_each(|f| f.share = f.mean_abs_shap / total);
        }
        features.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap).then_with(|| a.feature.cmp(&b.feature)));
        Ok(Self { n_rows: explanations.len(), total, features })
    }

    pub fn get(&self, feature: &str) -> Option<&FeatureImportance> {
        self.features.iter().find(|f| f.feature == feature)
    }

    /// Combined share of the `k` most important features.
    pub fn top_share(&self, k: usize) -> f64 {
        self.features.iter().take(k).map(|f| f.share).sum()
    }
}

/// Explains every row of `rows` and aggregates.
pub fn global_importance(
    forest: &RandomForest,
    encoding: &EncodingMap,
    rows: &FeatureMatrix,
    background: &BackgroundSet,
) -> Result<ImportanceReport, ExplainError> {
    if rows.is_empty() {
        return Err(ExplainError::MissingInput("evaluation rows are empty"));
    }
    let explanations = (0..rows.n_rows())
        .into_par_iter()
        .map(|i| tree_shap(forest, encoding, rows.row(i), background))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    ImportanceReport::from_explanations(&explanations)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneResult {
    pub threshold: f64,
    /// Features with mean `|φ|` at or above the threshold, by importance.
    pub kept: Vec<String>,
    pub dropped: Vec<String>,
}

pub fn prune_features(report: &ImportanceReport, threshold: f64) -> PruneResult {
    let (kept, dropped): (Vec<&FeatureImportance>, Vec<&FeatureImportance>) =
        report.features.iter().partition(|f| f.mean_abs_shap >= threshold);
    PruneResult {
        threshold,
        kept: kept.into_iter().map(|f| f.feature.clone()).collect(),
        dropped: dropped.into_iter().map(|f| f.feature.clone()).collect(),
    }
}
