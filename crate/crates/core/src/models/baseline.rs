use serde::{Deserialize, Serialize};

use super::Regressor;
use crate::error::ModelError;

/// MAE differences below this count as ties in the constant sweep.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantModel {
    pub value: f64,
}

impl Regressor for ConstantModel {
    fn predict_row(&self, _row: &[f64]) -> f64 {
        self.value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub constant: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    pub model: ConstantModel,
    pub training_mae: f64,
    /// Training MAE for every grid constant.
    pub sweep: Vec<SweepPoint>,
}

/// `0, step, 2·step, …` up to and including 1.
pub fn constant_grid(step: f64) -> Result<Vec<f64>, ModelError> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(ModelError::InvalidParam(format!("grid step {step} outside (0, 0.5]")));
    }
    let m = (1.0 / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=m).map(|i| ((i as f64 * step) * 1e12).round() / 1e12).collect();
    if *grid.last().expect("nonempty") < 1.0 - 1e-12 {
        grid.push(1.0);
    }
    Ok(grid)
}

fn constant_mae(labels: &[f64], c: f64) -> f64 {
    labels.iter().map(|y| (y - c).abs()).sum::<f64>() / labels.len() as f64
}

/// Grid search for the constant with lowest training MAE; ties go to the
/// smaller constant.
pub fn fit_constant(labels: &[f64], step: f64) -> Result<ConstantFit, ModelError> {
    if labels.is_empty() {
        return Err(ModelError::Empty);
    }
    let sweep: Vec<SweepPoint> = constant_grid(step)?
        .into_iter()
        .map(|constant| SweepPoint { constant, mae: constant_mae(labels, constant) })
        .collect();
    let best = sweep.iter().map(|p| p.mae).fold(f64::INFINITY, f64::min);
    let chosen = sweep
        .iter()
        .find(|p| p.mae <= best + TIE_TOLERANCE)
        .expect("grid is nonempty");
    Ok(ConstantFit { model: ConstantModel { value: chosen.constant }, training_mae: chosen.mae, sweep })
}

/// Sample median; mean of the middle pair for even counts.
pub fn fit_median(labels: &[f64]) -> Result<ConstantModel, ModelError> {
    if labels.is_empty() {
        return Err(ModelError::Empty);
    }
    let mut sorted = labels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let value = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    Ok(ConstantModel { value })
}
