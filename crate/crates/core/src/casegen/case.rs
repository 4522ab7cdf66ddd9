use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::schema::{FeatureKind, FeatureSchema, FeatureSpec};

/// A typed feature value. Integers and percents are numbers; percents are
/// fractions in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Bool(bool),
    Number(f64),
    Category(String),
}

impl FeatureValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Self::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Self::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            Self::Category(c) => Some(c),
            _ => None,
        }
    }

    /// Checks that the value has the right type and lies in the declared
    /// domain of `spec`.
    pub fn check_kind(&self, spec: &FeatureSpec) -> Result<(), String> {
        let id = &spec.id;
        match (spec.kind, self) {
            (FeatureKind::Boolean, Self::Bool(_)) => Ok(()),
            (FeatureKind::Categorical, Self::Category(c)) => {
                if spec.category_index(c).is_some() {
                    Ok(())
                } else {
                    Err(format!("feature `{id}`: unknown category `{c}`"))
                }
            }
            (kind, Self::Number(v)) if kind.is_ranged() => {
                if !v.is_finite() {
                    return Err(format!("feature `{id}`: value is not finite"));
                }
                if kind == FeatureKind::Integer && v.fract() != 0.0 {
                    return Err(format!("feature `{id}`: {v} is not an integer"));
                }
                match spec.bounds() {
                    Some((lo, hi)) if *v < lo || *v > hi => {
                        Err(format!("feature `{id}`: {v} outside range [{lo}, {hi}]"))
                    }
                    _ => Ok(()),
                }
            }
            (kind, _) => Err(format!("feature `{id}`: expected a {} value", kind.as_str())),
        }
    }
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Bool(b) => write!(f, "{b}"),
            Self::Number(v) => write!(f, "{v}"),
            Self::Category(c) => f.write_str(c),
        }
    }
}

/// One synthetic case: feature id to value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case_id: String,
    pub values: BTreeMap<String, FeatureValue>,
}

impl CaseRecord {
    pub fn new(case_id: impl Into<String>) -> Self {
        Self { case_id: case_id.into(), values: BTreeMap::new() }
    }

    pub fn with(mut self, id: &str, value: FeatureValue) -> Self {
        self.values.insert(id.to_string(), value);
        self
    }

    pub fn get(&self, id: &str) -> Option<&FeatureValue> {
        self.values.get(id)
    }

    pub fn set(&mut self, id: &str, value: FeatureValue) {
        self.values.insert(id.to_string(), value);
    }
}

/// A judge's decision: either no reduction, or a reduction between 5% and
/// 100% of the rent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionLabel {
    pub ordered: bool,
    pub reduction_pct: f64,
}

impl ReductionLabel {
    pub const FLOOR: f64 = 0.05;

    pub fn not_ordered() -> Self {
        Self { ordered: false, reduction_pct: 0.0 }
    }

    pub fn new(ordered: bool, reduction_pct: f64) -> Result<Self, String> {
        if !reduction_pct.is_finite() {
            return Err("reduction_pct is not finite".into());
        }
        if !ordered && reduction_pct != 0.0 {
            return Err(format!("reduction_pct {reduction_pct} with ordered = 0 must be 0"));
        }
        if ordered && !(Self::FLOOR..=1.0).contains(&reduction_pct) {
            return Err(format!("reduction_pct {reduction_pct} outside [0.05, 1.0]"));
        }
        Ok(Self { ordered, reduction_pct })
    }

    /// Maps a raw fraction onto the label domain `{0} ∪ [0.05, 1]`.
    pub fn from_fraction(value: f64) -> Self {
        let v = value.clamp(0.0, 1.0);
        if v < Self::FLOOR / 2.0 {
            Self::not_ordered()
        } else {
            Self { ordered: true, reduction_pct: v.max(Self::FLOOR) }
        }
    }

    /// Regression target.
    pub fn target(&self) -> f64 {
        self.reduction_pct
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Constraint id, or feature id for kind and range problems.
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.violations.iter().map(|v| v.id.as_str())
    }
}

/// Checks kinds, ranges and constraints. Violations are data, never errors.
pub fn validate_case(schema: &FeatureSchema, case: &CaseRecord) -> ValidationReport {
    let mut violations = Vec::new();
    for spec in &schema.features {
        match case.values.get(&spec.id) {
            None => violations.push(Violation {
                id: spec.id.clone(),
                message: format!("feature `{}` is missing", spec.id),
            }),
            Some(v) => {
                if let Err(message) = v.check_kind(spec) {
                    violations.push(Violation { id: spec.id.clone(), message });
                }
            }
        }
    }
    for id in case.values.keys() {
        if schema.feature(id).is_none() {
            violations.push(Violation {
                id: id.clone(),
                message: format!("feature `{id}` is not in the schema"),
            });
        }
    }
    for c in &schema.constraints {
        if c.holds(case) == Some(false) {
            violations.push(Violation {
                id: c.id.clone(),
                message: format!("constraint `{}` violated", c.id),
            });
        }
    }
    ValidationReport { violations }
}

/// Constraint check only, used by the sampler where kinds hold by construction.
pub(crate) fn satisfies_constraints(schema: &FeatureSchema, case: &CaseRecord) -> bool {
    schema.constraints.iter().all(|c| c.holds(case) == Some(true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_domain() {
        assert!(ReductionLabel::new(true, 0.03).is_err());
        assert!(ReductionLabel::new(false, 0.2).is_err());
        assert!(ReductionLabel::new(true, 1.01).is_err());
        assert_eq!(ReductionLabel::new(false, 0.0).unwrap().target(), 0.0);
        assert_eq!(ReductionLabel::new(true, 0.05).unwrap().target(), 0.05);
    }

    #[test]
    fn from_fraction_snaps_below_floor() {
        assert!(!ReductionLabel::from_fraction(0.02).ordered);
        assert_eq!(ReductionLabel::from_fraction(0.03).reduction_pct, 0.05);
        assert_eq!(ReductionLabel::from_fraction(1.7).reduction_pct, 1.0);
        assert_eq!(ReductionLabel::from_fraction(-0.4), ReductionLabel::not_ordered());
    }

    #[test]
    fn untagged_values_round_trip() {
        let case = CaseRecord::new("c")
            .with("b", FeatureValue::Bool(true))
            .with("n", FeatureValue::Number(5600.0))
            .with("k", FeatureValue::Category("monthly".into()));
        let text = serde_json::to_string(&case).unwrap();
        assert_eq!(serde_json::from_str::<CaseRecord>(&text).unwrap(), case);
    }
}
