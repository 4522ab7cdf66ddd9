use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::case::{CaseRecord, FeatureValue};
use super::render::placeholders;
use crate::digest::sha256_json;
use crate::error::SchemaError;

/// The schema shipped with the crate. Field list and weights are a
/// reconstruction, see the `provenance` field of the document.
pub const DEFAULT_SCHEMA_JSON: &str = include_str!("../../schema/default_schema.json");

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Integer,
    Percent,
    Boolean,
    Categorical,
}

impl FeatureKind {
    pub fn is_ranged(self) -> bool {
        matches!(self, Self::Numeric | Self::Integer | Self::Percent)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Numeric => "numeric",
            Self::Integer => "integer",
            Self::Percent => "percent",
            Self::Boolean => "boolean",
            Self::Categorical => "categorical",
        }
    }
}

/// One field of a defense deed.
///
/// Ranged kinds draw uniformly from `range` unless `levels` declares a
/// discrete weighted set; categoricals draw from `categories` with `weights`;
/// booleans are true with probability `p_true` (default one half).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub id: String,
    pub display_name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimals: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_true: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub false_text: Option<String>,
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub section: String,
}

impl FeatureSpec {
    /// `(lo, hi)` for ranged kinds.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        self.range.map(|[lo, hi]| (lo, hi))
    }

    pub fn span(&self) -> Option<f64> {
        self.bounds().map(|(lo, hi)| hi - lo)
    }

    pub fn category_index(&self, value: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == value)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CmpOp {
    #[default]
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    const EQ_TOLERANCE: f64 = 1e-9;

    pub fn apply(self, a: f64, b: f64) -> bool {
        match self {
            Self::Eq => (a - b).abs() <= Self::EQ_TOLERANCE,
            Self::Ne => (a - b).abs() > Self::EQ_TOLERANCE,
            Self::Lt => a < b,
            Self::Le => a <= b,
            Self::Gt => a > b,
            Self::Ge => a >= b,
        }
    }
}

/// `feature <op> value`. Written as `{"feature": .., "equals": ..}` for the
/// common equality case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub feature: String,
    #[serde(default)]
    pub op: CmpOp,
    #[serde(alias = "equals")]
    pub value: FeatureValue,
}

impl Condition {
    /// `None` when the case value is absent or of a kind the operator
    /// cannot compare.
    pub fn holds(&self, case: &CaseRecord) -> Option<bool> {
        let actual = case.values.get(&self.feature)?;
        match (actual, &self.value) {
            (FeatureValue::Number(a), FeatureValue::Number(b)) => Some(self.op.apply(*a, *b)),
            (FeatureValue::Bool(a), FeatureValue::Bool(b)) => match self.op {
                CmpOp::Eq => Some(a == b),
                CmpOp::Ne => Some(a != b),
                _ => None,
            },
            (FeatureValue::Category(a), FeatureValue::Category(b)) => match self.op {
                CmpOp::Eq => Some(a == b),
                CmpOp::Ne => Some(a != b),
                _ => None,
            },
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintRule {
    /// `lo < x < hi` when strict, `lo <= x <= hi` otherwise.
    RangeBound {
        feature: String,
        #[serde(default)]
        lo: Option<f64>,
        #[serde(default)]
        hi: Option<f64>,
        #[serde(default)]
        strict: bool,
    },
    Implication {
        #[serde(rename = "if")]
        condition: Condition,
        #[serde(rename = "then")]
        consequence: Condition,
    },
    /// `left <op> factor * right + offset`.
    Arithmetic {
        left: String,
        op: CmpOp,
        right: String,
        #[serde(default = "unit_factor")]
        factor: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn unit_factor() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub id: String,
    #[serde(flatten)]
    pub rule: ConstraintRule,
}

impl Constraint {
    pub fn referenced_features(&self) -> Vec<&str> {
        match &self.rule {
            ConstraintRule::RangeBound { feature, .. } => vec![feature],
            ConstraintRule::Implication { condition, consequence } => {
                vec![&condition.feature, &consequence.feature]
            }
            ConstraintRule::Arithmetic { left, right, .. } => vec![left, right],
        }
    }

    /// `None` if a referenced value is missing or has the wrong type.
    pub fn holds(&self, case: &CaseRecord) -> Option<bool> {
        match &self.rule {
            ConstraintRule::RangeBound { feature, lo, hi, strict } => {
                let v = case.values.get(feature)?.as_number()?;
                let lo_ok = lo.is_none_or(|lo| if *strict { v > lo } else { v >= lo });
                let hi_ok = hi.is_none_or(|hi| if *strict { v < hi } else { v <= hi });
                Some(lo_ok && hi_ok)
            }
            ConstraintRule::Implication { condition, consequence } => {
                if condition.holds(case)? {
                    consequence.holds(case)
                } else {
                    Some(true)
                }
            }
            ConstraintRule::Arithmetic { left, op, right, factor, offset } => {
                let l = case.values.get(left)?.as_number()?;
                let r = case.values.get(right)?.as_number()?;
                Some(op.apply(l, factor * r + offset))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    pub features: Vec<FeatureSpec>,
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    pub document_template: String,
}

impl FeatureSchema {
    pub fn feature(&self, id: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.features.iter().position(|f| f.id == id)
    }

    pub fn feature_ids(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.id.as_str())
    }

    /// Content digest of the canonical serialization.
    pub fn digest(&self) -> String {
        sha256_json(self)
    }

    /// Every violation, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut seen = BTreeSet::new();
        for f in &self.features {
            if !seen.insert(f.id.as_str()) {
                errs.push(format!("duplicate feature id `{}`", f.id));
            }
            check_feature(f, &mut errs);
        }

        let mut constraint_ids = BTreeSet::new();
        for c in &self.constraints {
            if !constraint_ids.insert(c.id.as_str()) {
                errs.push(format!("duplicate constraint id `{}`", c.id));
            }
            for fid in c.referenced_features() {
                if self.feature(fid).is_none() {
                    errs.push(format!("constraint `{}` references unknown feature `{fid}`", c.id));
                }
            }
            if let ConstraintRule::Implication { condition, consequence } = &c.rule {
                for cond in [condition, consequence] {
                    if let Some(spec) = self.feature(&cond.feature) {
                        if let Err(msg) = cond.value.check_kind(spec) {
                            errs.push(format!("constraint `{}`: {msg}", c.id));
                        }
                    }
                }
            }
        }

        match placeholders(&self.document_template) {
            Ok(names) => {
                for name in names {
                    if self.feature(&name).is_none() {
                        errs.push(format!("template placeholder `{name}` is not a feature id"));
                    }
                }
            }
            Err(e) => errs.push(e.to_string()),
        }
        errs
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SchemaError::Invalid(errs))
        }
    }

    /// The 25-feature schema shipped with the crate.
    pub fn default_schema() -> Self {
        load_schema(DEFAULT_SCHEMA_JSON).expect("shipped schema is valid")
    }
}

fn check_weights(owner: &str, weights: &[f64], expected_len: usize, errs: &mut Vec<String>) {
    if weights.len() != expected_len {
        errs.push(format!(
            "feature `{owner}`: {} weights for {expected_len} values",
            weights.len()
        ));
        return;
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        errs.push(format!("feature `{owner}`: weights must be finite and nonnegative"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
        errs.push(format!("feature `{owner}`: weights sum {sum}, expected 1"));
    }
}

fn check_feature(f: &FeatureSpec, errs: &mut Vec<String>) {
    let id = f.id.as_str();
    if id.is_empty() {
        errs.push("feature with empty id".to_string());
    }
    if f.kind.is_ranged() {
        match f.range {
            None => errs.push(format!("feature `{id}`: {} feature needs a range", f.kind.as_str())),
            Some([lo, hi]) => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    errs.push(format!("feature `{id}`: range requires lo < hi, got [{lo}, {hi}]"));
                }
                if f.kind == FeatureKind::Percent && (lo < 0.0 || hi > 1.0) {
                    errs.push(format!("feature `{id}`: percent range must lie within [0, 1]"));
                }
                if !f.levels.is_empty() {
                    check_weights(id, &f.weights, f.levels.len(), errs);
                    if f.levels.iter().any(|v| *v < lo || *v > hi) {
                        errs.push(format!("feature `{id}`: levels outside range"));
                    }
                }
            }
        }
    }
    match f.kind {
        FeatureKind::Categorical => {
            if f.categories.is_empty() {
                errs.push(format!("feature `{id}`: categorical feature without categories"));
            }
            let distinct: BTreeSet<_> = f.categories.iter().collect();
            if distinct.len() != f.categories.len() {
                errs.push(format!("feature `{id}`: duplicate categories"));
            }
            check_weights(id, &f.weights, f.categories.len(), errs);
        }
        FeatureKind::Boolean => {
            if let Some(p) = f.p_true {
                if !(0.0..=1.0).contains(&p) {
                    errs.push(format!("feature `{id}`: p_true must lie in [0, 1]"));
                }
            }
        }
        _ => {
            if f.levels.is_empty() && !f.weights.is_empty() {
                errs.push(format!("feature `{id}`: weights given without levels"));
            }
        }
    }
}

/// Parses and validates a schema document.
pub fn load_schema(source: &str) -> Result<FeatureSchema, SchemaError> {
    let schema: FeatureSchema = serde_json::from_str(source)?;
    schema.validate()?;
    Ok(schema)
}
