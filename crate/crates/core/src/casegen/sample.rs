use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::case::{satisfies_constraints, CaseRecord, FeatureValue};
use super::schema::{FeatureKind, FeatureSchema, FeatureSpec};
use crate::error::SampleError;

pub const DEFAULT_REJECTION_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy)]
pub struct SampleConfig {
    /// Consecutive rejected draws tolerated before giving up.
    pub rejection_cap: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { rejection_cap: DEFAULT_REJECTION_CAP }
    }
}

/// Rejection-samples `n` constraint-valid cases. Pure in `(schema, n, seed)`.
pub fn sample_cases(schema: &FeatureSchema, n: usize, seed: u64) -> Result<Vec<CaseRecord>, SampleError> {
    sample_cases_with(schema, n, seed, SampleConfig::default())
}

pub fn sample_cases_with(
    schema: &FeatureSchema,
    n: usize,
    seed: u64,
    config: SampleConfig,
) -> Result<Vec<CaseRecord>, SampleError> {
    if n == 0 {
        return Err(SampleError::ZeroCases);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = n.to_string().len().max(4);
    let mut cases = Vec::with_capacity(n);
    for index in 0..n {
        let case_id = format!("case-{:0width$}", index + 1);
        let mut rejections = 0;
        loop {
            let mut case = CaseRecord::new(case_id.clone());
            for spec in &schema.features {
                case.values.insert(spec.id.clone(), draw(spec, &mut rng));
            }
            if satisfies_constraints(schema, &case) {
                cases.push(case);
                break;
            }
            rejections += 1;
            if rejections >= config.rejection_cap {
                return Err(SampleError::Unsatisfiable { case_index: index, rejections });
            }
        }
    }
    Ok(cases)
}

fn round_to(value: f64, decimals: Option<u32>) -> f64 {
    match decimals {
        Some(d) => {
            let scale = 10f64.powi(d as i32);
            (value * scale).round() / scale
        }
        None => value,
    }
}

fn weighted_pick<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    if weights.len() <= 1 {
        return 0;
    }
    WeightedIndex::new(weights)
        .expect("schema validation guarantees normalized weights")
        .sample(rng)
}

fn draw<R: Rng>(spec: &FeatureSpec, rng: &mut R) -> FeatureValue {
    match spec.kind {
        FeatureKind::Boolean => FeatureValue::Bool(rng.random_bool(spec.p_true.unwrap_or(0.5))),
        FeatureKind::Categorical => {
            FeatureValue::Category(spec.categories[weighted_pick(&spec.weights, rng)].clone())
        }
        _ if !spec.levels.is_empty() => FeatureValue::Number(spec.levels[weighted_pick(&spec.weights, rng)]),
        FeatureKind::Integer => {
            let (lo, hi) = spec.bounds().expect("ranged");
            FeatureValue::Number(rng.random_range(lo.ceil() as i64..=hi.floor() as i64) as f64)
        }
        FeatureKind::Numeric | FeatureKind::Percent => {
            let (lo, hi) = spec.bounds().expect("ranged");
            let v = round_to(rng.random_range(lo..=hi), spec.decimals);
            FeatureValue::Number(v.clamp(lo, hi))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casegen::{load_schema, validate_case};

    #[test]
    fn full_scale_sample_is_valid() {
        let schema = FeatureSchema::default_schema();
        let cases = sample_cases(&schema, 600, 7).unwrap();
        assert_eq!(cases.len(), 600);
        for c in &cases {
            let report = validate_case(&schema, c);
            assert!(report.is_empty(), "{}: {:?}", c.case_id, report);
            let rent = c.get("monthly_rent").unwrap().as_number().unwrap();
            assert!(rent > 500.0 && rent < 50_000.0);
        }
    }

    #[test]
    fn determinism_is_byte_level() {
        let schema = FeatureSchema::default_schema();
        let a = serde_json::to_vec(&sample_cases(&schema, 100, 7).unwrap()).unwrap();
        let b = serde_json::to_vec(&sample_cases(&schema, 100, 7).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_vec(&sample_cases(&schema, 100, 8).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_categorical_gives_identical_cases() {
        let schema = load_schema(
            r#"{"version": "1", "features": [
                {"id": "only", "display_name": "Only", "kind": "categorical",
                 "categories": ["x"], "weights": [1.0]}],
                "document_template": "{only}"}"#,
        )
        .unwrap();
        let cases = sample_cases(&schema, 3, 99).unwrap();
        assert_eq!(cases.len(), 3);
        assert!(cases.iter().all(|c| c.values == cases[0].values));
    }

    #[test]
    fn unsatisfiable_constraints_hit_the_cap() {
        let schema = load_schema(
            r#"{"version": "1", "features": [
                {"id": "a", "display_name": "A", "kind": "numeric", "range": [0, 1]}],
                "constraints": [{"id": "never", "kind": "range_bound", "feature": "a", "lo": 2}],
                "document_template": "{a}"}"#,
        )
        .unwrap();
        let err = sample_cases_with(&schema, 2, 1, SampleConfig { rejection_cap: 50 }).unwrap_err();
        assert!(matches!(err, SampleError::Unsatisfiable { case_index: 0, rejections: 50 }));
    }

    #[test]
    fn zero_cases_rejected() {
        assert!(sample_cases(&FeatureSchema::default_schema(), 0, 1).is_err());
    }
}
