use std::sync::OnceLock;

use proptest::prelude::*;

use leasefair_core::bundle::{train_bundle, ModelBundle, TrainConfig};
use leasefair_core::casegen::{
    ingest_labels, oracle_label, sample_cases, validate_case, CaseRecord, DuplicatePolicy, FeatureKind,
    FeatureSchema, FeatureSpec, FeatureValue, LabelRow, OracleConfig,
};
use leasefair_core::counterfactual::{search_single_feature, Direction, GridConfig, Target};
use leasefair_core::models::{ForestParams, Regressor};
use leasefair_core::CounterfactualError;

fn bundle() -> &'static ModelBundle {
    static B: OnceLock<ModelBundle> = OnceLock::new();
    B.get_or_init(|| {
        let schema = FeatureSchema::default_schema();
        let cases = sample_cases(&schema, 200, 5).unwrap();
        let oracle = OracleConfig::three_feature();
        let rows: Vec<LabelRow> =
            cases.iter().map(|c| LabelRow::from_label(&c.case_id, oracle_label(&schema, c, &oracle, 5))).collect();
        let ds = ingest_labels(&schema, &cases, &rows, DuplicatePolicy::default()).unwrap().dataset;
        let cfg = TrainConfig {
            forest: ForestParams { n_trees: 20, ..ForestParams::default() },
            seed: 5,
            background_size: 16,
            importance: false,
            ..TrainConfig::default()
        };
        train_bundle(&schema, &ds, &cfg).unwrap()
    })
}

/// Grid built straight from the feature spec.
fn enumerate(spec: &FeatureSpec, points: usize) -> Vec<FeatureValue> {
    match spec.kind {
        FeatureKind::Boolean => vec![FeatureValue::Bool(false), FeatureValue::Bool(true)],
        FeatureKind::Categorical => spec.categories.iter().map(|c| FeatureValue::Category(c.clone())).collect(),
        FeatureKind::Integer => {
            let [lo, hi] = spec.range.unwrap();
            (lo as i64..=hi as i64).map(|v| FeatureValue::Number(v as f64)).collect()
        }
        FeatureKind::Numeric | FeatureKind::Percent => {
            let [lo, hi] = spec.range.unwrap();
            (0..points).map(|i| FeatureValue::Number(lo + (hi - lo) * i as f64 / (points - 1) as f64)).collect()
        }
    }
}

fn cost(spec: &FeatureSpec, a: &FeatureValue, b: &FeatureValue) -> f64 {
    match (a, b) {
        (FeatureValue::Number(x), FeatureValue::Number(y)) => {
            let [lo, hi] = spec.range.unwrap();
            (x - y).abs() / (hi - lo)
        }
        _ => 1.0,
    }
}

fn differs(a: &FeatureValue, b: &FeatureValue) -> bool {
    match (a, b) {
        (FeatureValue::Number(x), FeatureValue::Number(y)) => (x - y).abs() > 1e-12,
        _ => a != b,
    }
}

fn meets(target: &Target, orig: f64, p: f64) -> bool {
    match *target {
        Target::Change { delta, direction: Direction::Up } => p - orig >= delta,
        Target::Change { delta, direction: Direction::Down } => orig - p >= delta,
        Target::Change { delta, direction: Direction::Either } => (p - orig).abs() >= delta,
        Target::Reach { value, tol } => (p - value).abs() <= tol,
        Target::AtLeast { value } => p >= value,
        Target::AtMost { value } => p <= value,
    }
}

/// `None` if no feasible candidate exists, `Some(None)` if none meets the target.
fn oracle(
    model: &dyn Regressor,
    b: &ModelBundle,
    case: &CaseRecord,
    feature: &str,
    target: &Target,
    points: usize,
) -> Option<Option<(FeatureValue, f64)>> {
    let spec = b.schema.feature(feature).unwrap();
    let orig = case.get(feature).unwrap();
    let p0 = model.predict_row(&b.encode(case).unwrap());
    let mut feasible = false;
    let mut best: Option<(FeatureValue, f64)> = None;
    for v in enumerate(spec, points) {
        if !differs(&v, orig) {
            continue;
        }
        let mut c = case.clone();
        c.set(feature, v.clone());
        if !validate_case(&b.schema, &c).is_empty() {
            continue;
        }
        feasible = true;
        if !meets(target, p0, model.predict_row(&b.encode(&c).unwrap())) {
            continue;
        }
        let d = cost(spec, orig, &v);
        match &best {
            Some((_, bd)) if *bd <= d => {}
            _ => best = Some((v, d)),
        }
    }
    feasible.then_some(best)
}

fn target_strategy() -> impl Strategy<Value = Target> {
    prop_oneof![
        (0.01f64..0.3, prop_oneof![Just(Direction::Up), Just(Direction::Down), Just(Direction::Either)])
            .prop_map(|(delta, direction)| Target::Change { delta, direction }),
        (0.0f64..0.6).prop_map(|value| Target::AtLeast { value }),
        (0.0f64..0.6).prop_map(|value| Target::AtMost { value }),
        (0.0f64..0.6, 0.0f64..0.1).prop_map(|(value, tol)| Target::Reach { value, tol }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn search_is_grid_optimal(
        case_seed in 0u64..1000,
        feature_idx in 0usize..25,
        target in target_strategy(),
        points in prop_oneof![Just(101usize), 2usize..40],
    ) {
        let b = bundle();
        let case = sample_cases(&b.schema, 1, case_seed).unwrap().remove(0);
        let feature = b.schema.features[feature_idx].id.clone();
        let grid = GridConfig { numeric_points: points };
        let got = search_single_feature(&b.forest, &b.encoding, &b.schema, &case, &feature, &target, &grid);
        let expected = oracle(&b.forest, b, &case, &feature, &target, points);
        match (got, expected) {
            (Err(CounterfactualError::EmptyGrid(_)), None) => {}
            (Ok(None), Some(None)) => {}
            (Ok(Some(r)), Some(Some((value, d)))) => {
                prop_assert_eq!(&r.counterfactual_value, &value);
                prop_assert!((r.distance - d).abs() <= 1e-12);
                prop_assert!(validate_case(&b.schema, &r.counterfactual).is_empty());
                prop_assert!(meets(&target, r.original_prediction, r.counterfactual_prediction));
                let changed: Vec<&String> = case
                    .values
                    .iter()
                    .filter(|(k, v)| differs(v, r.counterfactual.get(k).unwrap()))
                    .map(|(k, _)| k)
                    .collect();
                prop_assert_eq!(changed, vec![&feature]);
                prop_assert_eq!(r.counterfactual.values.len(), case.values.len());
            }
            (got, expected) => prop_assert!(false, "search {:?} vs oracle {:?}", got.map(|r| r.map(|r| r.counterfactual_value)), expected),
        }
    }
}

#[test]
fn closure_model_ties_go_to_smaller_value() {
    let b = bundle();
    let case = sample_cases(&b.schema, 1, 1).unwrap().remove(0).with("loss_months", FeatureValue::Number(12.0));
    let case = case.with("reduction_months", FeatureValue::Number(1.0));
    let col = b.encoding.feature("loss_months").unwrap().offset;
    // Symmetric in loss_months around 12: both 10 and 14 qualify at distance 2/23.
    let model = move |x: &[f64]| ((x[col] - 12.0).abs() / 10.0).min(1.0);
    let target = Target::AtLeast { value: 0.2 };
    let r = search_single_feature(&model, &b.encoding, &b.schema, &case, "loss_months", &target, &GridConfig::default())
        .unwrap()
        .unwrap();
    assert_eq!(r.counterfactual_value, FeatureValue::Number(10.0));
    assert_eq!(oracle(&model, b, &case, "loss_months", &target, 101), Some(Some((FeatureValue::Number(10.0), 2.0 / 23.0))));
}
