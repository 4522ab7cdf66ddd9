//! Exact interventional TreeSHAP.
//!
//! For a fixed background row `z`, each leaf is reached by the hybrid input
//! for coalition `S` iff `A ⊆ S` and `B ∩ S = ∅`, where `A` holds the columns
//! whose split followed `x` against `z` and `B` those that followed `z`
//! against `x`. The Shapley value of that indicator game is
//! `(|A|-1)!|B|!/(|A|+|B|)!` for members of `A` and minus
//! `|A|!(|B|-1)!/(|A|+|B|)!` for members of `B`; every path where `x` and `z`
//! diverge is visited once.

use super::{BackgroundSet, ColumnShap, Explanation};
use crate::casegen::EncodingMap;
use crate::error::ExplainError;
use crate::models::{DecisionTree, RandomForest, Regressor, TreeNode};

const UNSEEN: u8 = 0;
const FROM_X: u8 = 1;
const FROM_Z: u8 = 2;

/// `w[a][b] = (a-1)! b! / (a+b)!` for `a ≥ 1`.
struct Weights {
    n: usize,
    w: Vec<f64>,
}

impl Weights {
    fn new(max: usize) -> Self {
        let n = max + 1;
        let mut w = vec![0.0; n * n];
        for a in 1..n {
            for b in 0..n - a {
                // 1 / (a · C(a+b, a))
                let mut c = 1.0;
                for i in 1..=a {
                    c = c * (b + i) as f64 / i as f64;
                }
                w[a * n + b] = 1.0 / (a as f64 * c);
            }
        }
        Self { n, w }
    }

    fn get(&self, a: usize, b: usize) -> f64 {
        self.w[a * self.n + b]
    }
}

struct Walker<'a> {
    tree: &'a DecisionTree,
    x: &'a [f64],
    z: &'a [f64],
    owner: Vec<u8>,
    from_x: Vec<usize>,
    from_z: Vec<usize>,
    weights: &'a Weights,
    phi: &'a mut [f64],
}

impl Walker<'_> {
    fn walk(&mut self, node: usize) {
        match &self.tree.nodes[node] {
            TreeNode::Leaf { value, .. } => {
                let (a, b) = (self.from_x.len(), self.from_z.len());
                if a > 0 {
                    let w = value * self.weights.get(a, b);
                    for &c in &self.from_x {
                        self.phi[c] += w;
                    }
                }
                if b > 0 {
                    let w = value * self.weights.get(b, a);
                    for &c in &self.from_z {
                        self.phi[c] -= w;
                    }
                }
            }
            TreeNode::Split { column, threshold, left, right, .. } => {
                let c = *column;
                let x_next = if self.x[c] <= *threshold { *left } else { *right };
                let z_next = if self.z[c] <= *threshold { *left } else { *right };
                match self.owner[c] {
                    FROM_X => self.walk(x_next),
                    FROM_Z => self.walk(z_next),
                    _ if x_next == z_next => self.walk(x_next),
                    _ => {
                        self.owner[c] = FROM_X;
                        self.from_x.push(c);
                        self.walk(x_next);
                        self.from_x.pop();
                        self.owner[c] = FROM_Z;
                        self.from_z.push(c);
                        self.walk(z_next);
                        self.from_z.pop();
                        self.owner[c] = UNSEEN;
                    }
                }
            }
        }
    }
}

/// Adds the background-averaged values of one tree into `phi`.
fn accumulate_tree(tree: &DecisionTree, x: &[f64], background: &BackgroundSet, weights: &Weights, phi: &mut [f64]) {
    let scale = 1.0 / background.len() as f64;
    let mut acc = vec![0.0; phi.len()];
    let mut owner = vec![UNSEEN; x.len()];
    for z in &background.rows {
        let mut w = Walker {
            tree,
            x,
            z,
            owner: std::mem::take(&mut owner),
            from_x: Vec::new(),
            from_z: Vec::new(),
            weights,
            phi: &mut acc,
        };
        w.walk(0);
        owner = w.owner;
    }
    for (p, a) in phi.iter_mut().zip(acc) {
        *p += a * scale;
    }
}

fn check_dims(n_features: usize, x: &[f64], background: &BackgroundSet) -> Result<(), ExplainError> {
    if x.len() != n_features {
        return Err(ExplainError::Dimension { expected: n_features, got: x.len() });
    }
    background.check(n_features)
}

/// Column values for a single tree.
pub fn tree_shap_single(tree: &DecisionTree, x: &[f64], background: &BackgroundSet) -> Result<ColumnShap, ExplainError> {
    check_dims(tree.n_features, x, background)?;
    let weights = Weights::new(tree.n_features);
    let mut values = vec![0.0; x.len()];
    accumulate_tree(tree, x, background, &weights, &mut values);
    let base_value = background.rows.iter().map(|z| tree.predict_row(z)).sum::<f64>() / background.len() as f64;
    Ok(ColumnShap { base_value, prediction: tree.predict_row(x), values })
}

/// Column values for the forest: the mean of the per-tree values.
pub fn tree_shap_columns(forest: &RandomForest, x: &[f64], background: &BackgroundSet) -> Result<ColumnShap, ExplainError> {
    check_dims(forest.n_features, x, background)?;
    let weights = Weights::new(forest.n_features);
    let mut values = vec![0.0; x.len()];
    for tree in &forest.trees {
        accumulate_tree(tree, x, background, &weights, &mut values);
    }
    let t = forest.trees.len() as f64;
    values.iter_mut().for_each(|v| *v /= t);
    let base_value = background.rows.iter().map(|z| forest.predict_row(z)).sum::<f64>() / background.len() as f64;
    Ok(ColumnShap { base_value, prediction: forest.predict_row(x), values })
}

/// Explanation of `forest(x)` against `background`, aggregated to raw features.
pub fn tree_shap(
    forest: &RandomForest,
    encoding: &EncodingMap,
    x: &[f64],
    background: &BackgroundSet,
) -> Result<Explanation, ExplainError> {
    if encoding.dim() != forest.n_features {
        return Err(ExplainError::Dimension { expected: forest.n_features, got: encoding.dim() });
    }
    let cols = tree_shap_columns(forest, x, background)?;
    Explanation::from_columns(&cols, encoding, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ForestParams;

    fn stump(threshold: f64, lo: f64, hi: f64) -> DecisionTree {
        DecisionTree {
            n_features: 2,
            nodes: vec![
                TreeNode::Split { column: 0, threshold, left: 1, right: 2, value: 0.5 * (lo + hi), samples: 2 },
                TreeNode::Leaf { value: lo, samples: 1 },
                TreeNode::Leaf { value: hi, samples: 1 },
            ],
        }
    }

    #[test]
    fn weights_match_factorials() {
        let w = Weights::new(6);
        let f = |n: usize| (1..=n).product::<usize>() as f64;
        for a in 1..=6 {
            for b in 0..=(6 - a) {
                let exact = f(a - 1) * f(b) / f(a + b);
                assert!((w.get(a, b) - exact).abs() < 1e-15 * exact.max(1.0));
            }
        }
    }

    #[test]
    fn single_split_attributes_everything() {
        let t = stump(0.5, 0.1, 0.9);
        let bg = BackgroundSet::new(vec![vec![0.2, 7.0]]).unwrap();
        let s = tree_shap_single(&t, &[0.8, -3.0], &bg).unwrap();
        assert!((s.values[0] - 0.8).abs() < 1e-15);
        assert_eq!(s.values[1], 0.0);
        assert_eq!(s.base_value, 0.1);
        assert_eq!(s.prediction, 0.9);
    }

    #[test]
    fn leaf_only_forest_gives_zero() {
        let leaf = DecisionTree { n_features: 2, nodes: vec![TreeNode::Leaf { value: 0.3, samples: 4 }] };
        let forest = RandomForest {
            n_features: 2,
            params: ForestParams::default(),
            seed: 0,
            tree_seeds: vec![0, 1],
            label_range: [0.3, 0.3],
            trees: vec![leaf.clone(), leaf],
        };
        let bg = BackgroundSet::new(vec![vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let s = tree_shap_columns(&forest, &[5.0, 5.0], &bg).unwrap();
        assert_eq!(s.values, vec![0.0, 0.0]);
        assert_eq!(s.base_value, s.prediction);
    }

    #[test]
    fn interaction_split_evenly() {
        // f = 1 iff x0 > 0.5 and x1 > 0.5; x = (1, 1), z = (0, 0).
        let t = DecisionTree {
            n_features: 2,
            nodes: vec![
                TreeNode::Split { column: 0, threshold: 0.5, left: 1, right: 2, value: 0.25, samples: 4 },
                TreeNode::Leaf { value: 0.0, samples: 2 },
                TreeNode::Split { column: 1, threshold: 0.5, left: 3, right: 4, value: 0.5, samples: 2 },
                TreeNode::Leaf { value: 0.0, samples: 1 },
                TreeNode::Leaf { value: 1.0, samples: 1 },
            ],
        };
        let bg = BackgroundSet::new(vec![vec![0.0, 0.0]]).unwrap();
        let s = tree_shap_single(&t, &[1.0, 1.0], &bg).unwrap();
        assert!((s.values[0] - 0.5).abs() < 1e-15 && (s.values[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let t = stump(0.5, 0.1, 0.9);
        let bg = BackgroundSet::new(vec![vec![0.2, 7.0]]).unwrap();
        assert!(matches!(tree_shap_single(&t, &[0.1], &bg), Err(ExplainError::Dimension { .. })));
        let bg3 = BackgroundSet::new(vec![vec![0.2, 7.0, 1.0]]).unwrap();
        assert!(tree_shap_single(&t, &[0.1, 0.2], &bg3).is_err());
    }
}
