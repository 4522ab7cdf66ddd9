//! Synthetic labeling oracle standing in for the judges' answers.
//!
//! The label is `clip(intercept + Σ term(x) + noise)` snapped onto the label
//! domain. Ranged features enter range-normalized, booleans as 0/1,
//! categoricals through a per-category weight. Features not named by a term
//! have no effect.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::case::{CaseRecord, FeatureValue, ReductionLabel};
use super::labels::LabelRow;
use super::schema::{FeatureKind, FeatureSchema};
use crate::error::SchemaError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleTerm {
    pub feature: String,
    #[serde(default)]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub category_weights: BTreeMap<String, f64>,
}

impl OracleTerm {
    pub fn linear(feature: &str, weight: f64) -> Self {
        Self { feature: feature.to_string(), weight, category_weights: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    #[serde(default)]
    pub intercept: f64,
    pub terms: Vec<OracleTerm>,
    /// Half-width of the uniform noise added before clipping.
    #[serde(default)]
    pub noise: f64,
    /// Labels are rounded to this step (whole percents by default).
    #[serde(default = "default_rounding")]
    pub round_to: Option<f64>,
}

fn default_rounding() -> Option<f64> {
    Some(0.01)
}

impl OracleConfig {
    /// Noise-free oracle on the three features the deeds treat as decisive:
    /// loss relative to total income, support received, and rent level.
    pub fn three_feature() -> Self {
        Self {
            intercept: -0.15,
            terms: vec![
                OracleTerm::linear("loss_pct_of_tenant_income", 0.6),
                OracleTerm::linear("support_amount", -0.8),
                OracleTerm::linear("monthly_rent", 0.25),
            ],
            noise: 0.0,
            round_to: default_rounding(),
        }
    }

    pub fn features(&self) -> BTreeSet<&str> {
        self.terms.iter().map(|t| t.feature.as_str()).collect()
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<(), SchemaError> {
        let mut errs = Vec::new();
        for t in &self.terms {
            match schema.feature(&t.feature) {
                None => errs.push(format!("oracle term references unknown feature `{}`", t.feature)),
                Some(spec) => {
                    for c in t.category_weights.keys() {
                        if spec.category_index(c).is_none() {
                            errs.push(format!("oracle term `{}`: unknown category `{c}`", t.feature));
                        }
                    }
                }
            }
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            errs.push("oracle noise must be finite and nonnegative".into());
        }
        if let Some(step) = self.round_to {
            if !(step > 0.0 && step <= 0.5) {
                errs.push("oracle round_to must lie in (0, 0.5]".into());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(SchemaError::Invalid(errs))
        }
    }

    /// Noise-free score before snapping onto the label domain.
    pub fn base_score(&self, schema: &FeatureSchema, case: &CaseRecord) -> f64 {
        let mut score = self.intercept;
        for t in &self.terms {
            let (Some(spec), Some(value)) = (schema.feature(&t.feature), case.get(&t.feature)) else {
                continue;
            };
            score += match (spec.kind, value) {
                (FeatureKind::Categorical, FeatureValue::Category(c)) => {
                    t.category_weights.get(c).copied().unwrap_or(0.0)
                }
                (FeatureKind::Boolean, FeatureValue::Bool(b)) => {
                    if *b {
                        t.weight
                    } else {
                        0.0
                    }
                }
                (_, FeatureValue::Number(v)) => match spec.bounds() {
                    Some((lo, hi)) => t.weight * (v - lo) / (hi - lo),
                    None => t.weight * v,
                },
                _ => 0.0,
            };
        }
        score
    }
}

fn noise_seed(seed: u64, case_id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(case_id.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

/// Deterministic in `(case, oracle, seed)`; noise is keyed on the case id.
pub fn oracle_label(schema: &FeatureSchema, case: &CaseRecord, oracle: &OracleConfig, seed: u64) -> ReductionLabel {
    let mut score = oracle.base_score(schema, case);
    if oracle.noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(seed, &case.case_id));
        score += rng.random_range(-oracle.noise..=oracle.noise);
    }
    let mut v = score.clamp(0.0, 1.0);
    if let Some(step) = oracle.round_to {
        v = ((v / step).round() * step).clamp(0.0, 1.0);
        // Strip representation noise such as 0.15000000000000002.
        v = (v * 1e9).round() / 1e9;
    }
    ReductionLabel::from_fraction(v)
}

/// Labels `answered` of the cases, chosen uniformly without replacement and
/// kept in case order. The rest stay unanswered.
pub fn simulate_answers(
    schema: &FeatureSchema,
    cases: &[CaseRecord],
    oracle: &OracleConfig,
    answered: usize,
    seed: u64,
) -> Vec<LabelRow> {
    let answered = answered.min(cases.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ANSWER_STREAM);
    let mut picked = rand::seq::index::sample(&mut rng, cases.len(), answered).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| LabelRow::from_label(&cases[i].case_id, oracle_label(schema, &cases[i], oracle, seed)))
        .collect()
}

const ANSWER_STREAM: u64 = 0x616e_7377_6572_7321;
