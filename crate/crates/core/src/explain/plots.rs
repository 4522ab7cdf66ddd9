//! Render-ready series for the SHAP plot families.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Explanation, ImportanceReport};
use crate::casegen::FeatureValue;
use crate::error::ExplainError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Waterfall,
    Force,
    Beeswarm,
    Dependence,
    Decision,
}

impl FromStr for PlotKind {
    type Err = ExplainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "waterfall" => Ok(Self::Waterfall),
            "force" => Ok(Self::Force),
            "beeswarm" => Ok(Self::Beeswarm),
            "dependence" => Ok(Self::Dependence),
            "decision" => Ok(Self::Decision),
            other => Err(ExplainError::UnknownPlotKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaterfallStep {
    pub feature: String,
    pub value: FeatureValue,
    pub shap: f64,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceSegment {
    pub feature: String,
    pub shap: f64,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmPoint {
    pub shap: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeeswarmRow {
    pub feature: String,
    pub mean_abs_shap: f64,
    pub points: Vec<BeeswarmPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencePoint {
    pub value: f64,
    pub shap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPath {
    pub prediction: f64,
    /// Running total after each feature in `order`, starting from the base.
    pub cumulative: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlotPayload {
    /// Bars sorted by `|φ|`, largest first; the last `end` is the prediction.
    Waterfall { base_value: f64, prediction: f64, steps: Vec<WaterfallStep> },
    /// Positive segments lead up to the prediction, negative ones lead away
    /// from it; the largest segments sit next to the prediction.
    Force { base_value: f64, prediction: f64, positive: Vec<ForceSegment>, negative: Vec<ForceSegment> },
    /// Rows by descending mean `|φ|`.
    Beeswarm { rows: Vec<BeeswarmRow> },
    Dependence { feature: String, points: Vec<DependencePoint> },
    /// `order` runs from least to most important feature.
    Decision { base_value: f64, order: Vec<String>, paths: Vec<DecisionPath> },
}

/// Builds one plot. Single-instance kinds use the first explanation.
pub fn plot_payload(
    kind: PlotKind,
    explanations: &[Explanation],
    feature: Option<&str>,
) -> Result<PlotPayload, ExplainError> {
    let first = explanations.first().ok_or(ExplainError::MissingInput("at least one explanation is required"))?;
    Ok(match kind {
        PlotKind::Waterfall => waterfall(first),
        PlotKind::Force => force(first),
        PlotKind::Beeswarm => {
            let report = ImportanceReport::from_explanations(explanations)?;
            let rows = report
                .features
                .iter()
                .map(|f| BeeswarmRow {
                    feature: f.feature.clone(),
                    mean_abs_shap: f.mean_abs_shap,
                    points: explanations
                        .iter()
                        .filter_map(|e| e.contributions.iter().find(|c| c.feature == f.feature))
                        .map(|c| BeeswarmPoint { shap: c.shap, value: c.coordinate })
                        .collect(),
                })
                .collect();
            PlotPayload::Beeswarm { rows }
        }
        PlotKind::Dependence => {
            let id = feature.ok_or(ExplainError::MissingInput("dependence plot needs a feature id"))?;
            if first.contribution(id).is_none() {
                return Err(ExplainError::UnknownFeature(id.to_string()));
            }
            let points = explanations
                .iter()
                .filter_map(|e| e.contributions.iter().find(|c| c.feature == id))
                .map(|c| DependencePoint { value: c.coordinate, shap: c.shap })
                .collect();
            PlotPayload::Dependence { feature: id.to_string(), points }
        }
        PlotKind::Decision => {
            let report = ImportanceReport::from_explanations(explanations)?;
            let order: Vec<String> = report.features.iter().rev().map(|f| f.feature.clone()).collect();
            let paths = explanations
                .iter()
                .map(|e| {
                    let mut acc = e.base_value;
                    let cumulative = order
                        .iter()
                        .map(|id| {
                            acc += e.contribution(id).unwrap_or(0.0);
                            acc
                        })
                        .collect();
                    DecisionPath { prediction: e.prediction, cumulative }
                })
                .collect();
            PlotPayload::Decision { base_value: first.base_value, order, paths }
        }
    })
}

fn waterfall(e: &Explanation) -> PlotPayload {
    let mut acc = e.base_value;
    let steps = e
        .ranked()
        .into_iter()
        .map(|c| {
            let start = acc;
            acc += c.shap;
            WaterfallStep { feature: c.feature.clone(), value: c.value.clone(), shap: c.shap, start, end: acc }
        })
        .collect();
    PlotPayload::Waterfall { base_value: e.base_value, prediction: e.prediction, steps }
}

fn force(e: &Explanation) -> PlotPayload {
    let ranked = e.ranked();
    let mut positive = Vec::new();
    let mut hi = e.prediction;
    for c in ranked.iter().filter(|c| c.shap > 0.0) {
        positive.push(ForceSegment { feature: c.feature.clone(), shap: c.shap, start: hi - c.shap, end: hi });
        hi -= c.shap;
    }
    let mut negative = Vec::new();
    let mut lo = e.prediction;
    for c in ranked.iter().filter(|c| c.shap < 0.0) {
        negative.push(ForceSegment { feature: c.feature.clone(), shap: c.shap, start: lo, end: lo - c.shap });
        lo -= c.shap;
    }
    PlotPayload::Force { base_value: e.base_value, prediction: e.prediction, positive, negative }
}
