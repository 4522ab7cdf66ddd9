use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, Regressor};
use crate::error::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl Regressor for LinearModel {
    fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

/// Ordinary least squares on centered data via SVD. Singular directions are
/// dropped, which yields the minimum-norm solution for rank-deficient inputs.
pub fn fit_linear(data: &FeatureMatrix) -> Result<LinearModel, ModelError> {
    let (n, d) = (data.n_rows(), data.n_cols());
    if n == 0 {
        return Err(ModelError::Empty);
    }
    let y = data.labels();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if d == 0 {
        return Ok(LinearModel { weights: vec![], intercept: y_mean });
    }
    let mut x_mean = vec![0.0; d];
    for r in data.rows() {
        for (m, v) in x_mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= n as f64);

    let a = DMatrix::from_fn(n, d, |i, j| data.get(i, j) - x_mean[j]);
    let b = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * n.max(d) as f64 * f64::EPSILON;
    let w = if max_sv == 0.0 {
        DVector::zeros(d)
    } else {
        svd.solve(&b, eps).map_err(|e| ModelError::Solve(e.to_string()))?
    };
    let weights: Vec<f64> = w.iter().copied().collect();
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("linear weights"));
    }
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel { weights, intercept })
}
