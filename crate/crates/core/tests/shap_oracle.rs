use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use leasefair_core::explain::{brute_force_shap, tree_shap_columns, tree_shap_single, BackgroundSet};
use leasefair_core::models::{fit_forest, FeatureMatrix, ForestParams, RandomForest, Regressor, TreeNode};

struct Setup {
    forest: RandomForest,
    background: BackgroundSet,
    instances: Vec<Vec<f64>>,
}

/// Random data with a few discrete columns so that instance values often
/// coincide with thresholds' neighbours and with background values.
fn setup(seed: u64, d: usize, n_trees: usize, bg: usize, n_inst: usize) -> Setup {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 60;
    let row = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d).map(|j| if j % 3 == 2 { rng.random_range(0..3) as f64 } else { rng.random::<f64>() }).collect()
    };
    let rows: Vec<Vec<f64>> = (0..n).map(|_| row(&mut rng)).collect();
    let labels: Vec<f64> = rows
        .iter()
        .map(|r| {
            let s = r.iter().enumerate().map(|(j, v)| v * (j as f64 + 1.0).sin()).sum::<f64>();
            (0.5 + 0.2 * s + 0.1 * r[0] * r[d - 1]).clamp(0.0, 1.0)
        })
        .collect();
    let data = FeatureMatrix::from_rows(rows, labels, Vec::new()).unwrap();
    let params = ForestParams { n_trees, min_samples_split: 4, ..ForestParams::default() };
    let forest = fit_forest(&data, &params, seed).unwrap();
    let background = BackgroundSet::new((0..bg).map(|_| row(&mut rng)).collect()).unwrap();
    let instances = (0..n_inst).map(|_| row(&mut rng)).collect();
    Setup { forest, background, instances }
}

fn used_columns(forest: &RandomForest) -> Vec<bool> {
    let mut used = vec![false; forest.n_features];
    for t in &forest.trees {
        for node in &t.nodes {
            if let TreeNode::Split { column, .. } = node {
                used[*column] = true;
            }
        }
    }
    used
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tree_shap_matches_brute_force(
        seed in any::<u64>(),
        d in 2usize..=8,
        n_trees in 1usize..=6,
        bg in 1usize..=10,
    ) {
        let s = setup(seed, d, n_trees, bg, 3);
        for x in &s.instances {
            let fast = tree_shap_columns(&s.forest, x, &s.background).unwrap();
            let slow = brute_force_shap(&s.forest, x, &s.background).unwrap();
            for (a, b) in fast.values.iter().zip(&slow.values) {
                prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
            }
            prop_assert!((fast.base_value - slow.base_value).abs() <= 1e-12);
            prop_assert!(fast.additivity_error() <= 1e-9);
        }
    }

    #[test]
    fn forest_values_are_tree_means(seed in any::<u64>(), n_trees in 1usize..=8) {
        let s = setup(seed, 5, n_trees, 6, 2);
        for x in &s.instances {
            let whole = tree_shap_columns(&s.forest, x, &s.background).unwrap();
            let mut mean = vec![0.0; 5];
            for t in &s.forest.trees {
                let single = tree_shap_single(t, x, &s.background).unwrap();
                for (m, v) in mean.iter_mut().zip(&single.values) {
                    *m += v / n_trees as f64;
                }
            }
            for (a, b) in whole.values.iter().zip(&mean) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn unused_columns_get_exact_zero(seed in any::<u64>()) {
        let s = setup(seed, 6, 2, 8, 3);
        let used = used_columns(&s.forest);
        for x in &s.instances {
            let phi = tree_shap_columns(&s.forest, x, &s.background).unwrap();
            for (j, v) in phi.values.iter().enumerate() {
                if !used[j] {
                    prop_assert_eq!(*v, 0.0);
                }
            }
        }
    }

    #[test]
    fn base_value_is_background_mean(seed in any::<u64>(), bg in 1usize..=16) {
        let s = setup(seed, 4, 3, bg, 1);
        let phi = tree_shap_columns(&s.forest, &s.instances[0], &s.background).unwrap();
        let mean = s.background.rows.iter().map(|z| s.forest.predict_row(z)).sum::<f64>() / bg as f64;
        prop_assert!((phi.base_value - mean).abs() <= 1e-12);
    }
}

#[test]
fn instance_equal_to_background_has_zero_attribution() {
    let s = setup(3, 5, 4, 1, 0);
    let z = s.background.rows[0].clone();
    let phi = tree_shap_columns(&s.forest, &z, &s.background).unwrap();
    assert!(phi.values.iter().all(|v| *v == 0.0));
}
