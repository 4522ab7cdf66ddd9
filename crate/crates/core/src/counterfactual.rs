//! Brute-force single-feature counterfactuals: change one actionable feature
//! over a grid and keep the closest value that moves the prediction enough.

use serde::{Deserialize, Serialize};

use crate::casegen::{validate_case, CaseRecord, EncodingMap, FeatureKind, FeatureSchema, FeatureSpec, FeatureValue};
use crate::error::CounterfactualError;
use crate::explain::Explanation;
use crate::models::Regressor;

pub const NO_COUNTERFACTUAL: &str = "no counterfactual found";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    #[default]
    Either,
}

/// Condition the counterfactual prediction must meet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Target {
    /// Prediction moves by at least `delta` in `direction`.
    Change { delta: f64, #[serde(default)] direction: Direction },
    /// Prediction lands within `tol` of `value`.
    Reach { value: f64, tol: f64 },
    AtLeast { value: f64 },
    AtMost { value: f64 },
}

impl Default for Target {
    fn default() -> Self {
        Target::Change { delta: 0.10, direction: Direction::Either }
    }
}

impl Target {
    pub fn validate(&self) -> Result<(), CounterfactualError> {
        let bad = |m: &str| Err(CounterfactualError::InvalidTarget(m.to_string()));
        match *self {
            Target::Change { delta, .. } if !(delta.is_finite() && delta > 0.0) => bad("delta must be positive"),
            Target::Reach { value, tol } if !(value.is_finite() && tol.is_finite() && tol >= 0.0) => {
                bad("reach needs a finite value and a nonnegative tolerance")
            }
            Target::AtLeast { value } | Target::AtMost { value } if !value.is_finite() => bad("value must be finite"),
            _ => Ok(()),
        }
    }

    pub fn is_met(&self, original: f64, candidate: f64) -> bool {
        match *self {
            Target::Change { delta, direction } => match direction {
                Direction::Up => candidate - original >= delta,
                Direction::Down => original - candidate >= delta,
                Direction::Either => (candidate - original).abs() >= delta,
            },
            Target::Reach { value, tol } => (candidate - value).abs() <= tol,
            Target::AtLeast { value } => candidate >= value,
            Target::AtMost { value } => candidate <= value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// Evenly spaced points across the range of numeric and percent features.
    pub numeric_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { numeric_points: 101 }
    }
}

/// Every candidate value for `spec`, ascending.
pub fn candidate_values(spec: &FeatureSpec, grid: &GridConfig) -> Vec<FeatureValue> {
    match spec.kind {
        FeatureKind::Categorical => spec.categories.iter().cloned().map(FeatureValue::Category).collect(),
        FeatureKind::Boolean => vec![FeatureValue::Bool(false), FeatureValue::Bool(true)],
        FeatureKind::Integer => {
            let (lo, hi) = spec.bounds().unwrap_or((0.0, 0.0));
            let (lo, hi) = (lo.ceil() as i64, hi.floor() as i64);
            (lo..=hi).map(|v| FeatureValue::Number(v as f64)).collect()
        }
        FeatureKind::Numeric | FeatureKind::Percent => {
            let (lo, hi) = spec.bounds().unwrap_or((0.0, 0.0));
            let m = grid.numeric_points;
            match m {
                0 => Vec::new(),
                1 => vec![FeatureValue::Number(lo)],
                _ => (0..m)
                    .map(|i| FeatureValue::Number(lo + (hi - lo) * i as f64 / (m - 1) as f64))
                    .collect(),
            }
        }
    }
}

/// Range-normalized distance; any change of a categorical or boolean costs 1.
pub fn normalized_distance(spec: &FeatureSpec, a: &FeatureValue, b: &FeatureValue) -> f64 {
    match (a.as_number(), b.as_number(), spec.span()) {
        (Some(x), Some(y), Some(span)) if span > 0.0 => (x - y).abs() / span,
        _ if a == b => 0.0,
        _ => 1.0,
    }
}

fn same_value(a: &FeatureValue, b: &FeatureValue) -> bool {
    match (a.as_number(), b.as_number()) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
        _ => a == b,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResult {
    pub feature: String,
    pub original_value: FeatureValue,
    pub counterfactual_value: FeatureValue,
    pub original_prediction: f64,
    pub counterfactual_prediction: f64,
    pub distance: f64,
    pub counterfactual: CaseRecord,
}

/// Evaluates every feasible grid value of `feature`; returns the closest one
/// meeting `target`, ties going to the smaller value.
#[allow(clippy::too_many_arguments)]
pub fn search_single_feature<M: Regressor + ?Sized>(
    model: &M,
    encoding: &EncodingMap,
    schema: &FeatureSchema,
    case: &CaseRecord,
    feature: &str,
    target: &Target,
    grid: &GridConfig,
) -> Result<Option<CounterfactualResult>, CounterfactualError> {
    target.validate()?;
    let spec = schema.feature(feature).ok_or_else(|| CounterfactualError::UnknownFeature(feature.to_string()))?;
    if encoding.feature(feature).is_none() {
        return Err(CounterfactualError::NotEncoded(feature.to_string()));
    }
    let original_value = case
        .get(feature)
        .cloned()
        .ok_or_else(|| CounterfactualError::Encode(crate::error::EncodeError::MissingFeature(feature.to_string())))?;
    let original_prediction = model.predict_row(&encoding.encode(case)?);

    let mut feasible = 0usize;
    let mut best: Option<CounterfactualResult> = None;
    for value in candidate_values(spec, grid) {
        if same_value(&value, &original_value) {
            continue;
        }
        let mut candidate = case.clone();
        candidate.set(feature, value.clone());
        if !validate_case(schema, &candidate).is_empty() {
            continue;
        }
        feasible += 1;
        let prediction = model.predict_row(&encoding.encode(&candidate)?);
        if !target.is_met(original_prediction, prediction) {
            continue;
        }
        let distance = normalized_distance(spec, &original_value, &value);
        if best.as_ref().is_none_or(|b| distance < b.distance) {
            best = Some(CounterfactualResult {
                feature: feature.to_string(),
                original_value: original_value.clone(),
                counterfactual_value: value,
                original_prediction,
                counterfactual_prediction: prediction,
                distance,
                counterfactual: candidate,
            });
        }
    }
    if feasible == 0 {
        return Err(CounterfactualError::EmptyGrid(feature.to_string()));
    }
    Ok(best)
}

/// Outcome of one feature's search inside a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub feature: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shap: Option<f64>,
    pub result: Option<CounterfactualResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl SearchOutcome {
    fn from_search(feature: &str, shap: Option<f64>, r: Result<Option<CounterfactualResult>, CounterfactualError>) -> Self {
        let (result, message) = match r {
            Ok(Some(res)) => (Some(res), None),
            Ok(None) => (None, Some(NO_COUNTERFACTUAL.to_string())),
            Err(e) => (None, Some(e.to_string())),
        };
        Self { feature: feature.to_string(), shap, result, message }
    }
}

/// Searches the `k` features with the largest `|φ|`, in that order.
#[allow(clippy::too_many_arguments)]
pub fn counterfactuals_for_top_k<M: Regressor + ?Sized>(
    model: &M,
    encoding: &EncodingMap,
    schema: &FeatureSchema,
    case: &CaseRecord,
    explanation: &Explanation,
    k: usize,
    target: &Target,
    grid: &GridConfig,
) -> Vec<SearchOutcome> {
    explanation
        .ranked()
        .into_iter()
        .take(k)
        .map(|c| {
            let r = search_single_feature(model, encoding, schema, case, &c.feature, target, grid);
            SearchOutcome::from_search(&c.feature, Some(c.shap), r)
        })
        .collect()
}

/// A counterfactual request over an explicit actionable feature list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualQuery {
    pub case: CaseRecord,
    pub actionable: Vec<String>,
    #[serde(default)]
    pub target: Target,
    #[serde(default)]
    pub grid: GridConfig,
}

impl CounterfactualQuery {
    pub fn run<M: Regressor + ?Sized>(
        &self,
        model: &M,
        encoding: &EncodingMap,
        schema: &FeatureSchema,
    ) -> Vec<SearchOutcome> {
        self.actionable
            .iter()
            .map(|f| {
                let r = search_single_feature(model, encoding, schema, &self.case, f, &self.target, &self.grid);
                SearchOutcome::from_search(f, None, r)
            })
            .collect()
    }
}
