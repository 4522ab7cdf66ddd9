use super::{BackgroundSet, ColumnShap};
use crate::error::ExplainError;
use crate::models::Regressor;

pub const BRUTE_FORCE_MAX_COLUMNS: usize = 20;

/// Shapley values by enumerating all `2^d` coalitions of encoded columns.
pub fn brute_force_shap<M: Regressor + ?Sized>(
    model: &M,
    x: &[f64],
    background: &BackgroundSet,
) -> Result<ColumnShap, ExplainError> {
    let d = x.len();
    if d > BRUTE_FORCE_MAX_COLUMNS {
        return Err(ExplainError::TooManyColumns { max: BRUTE_FORCE_MAX_COLUMNS, got: d });
    }
    background.check(d)?;

    let n_masks = 1usize << d;
    let mut v = vec![0.0; n_masks];
    let mut hybrid = vec![0.0; d];
    for (mask, slot) in v.iter_mut().enumerate() {
        let mut total = 0.0;
        for z in &background.rows {
            for j in 0..d {
                hybrid[j] = if mask >> j & 1 == 1 { x[j] } else { z[j] };
            }
            total += model.predict_row(&hybrid);
        }
        *slot = total / background.len() as f64;
    }

    // |S|!(d-|S|-1)!/d! = 1 / (d · C(d-1, |S|))
    let mut coalition_weight = vec![0.0; d.max(1)];
    for (s, w) in coalition_weight.iter_mut().enumerate() {
        let mut c = 1.0;
        for i in 1..=s {
            c = c * (d - 1 - s + i) as f64 / i as f64;
        }
        *w = 1.0 / (d as f64 * c);
    }

    let mut values = vec![0.0; d];
    for (i, phi) in values.iter_mut().enumerate() {
        let bit = 1usize << i;
        for mask in (0..n_masks).filter(|m| m & bit == 0) {
            *phi += coalition_weight[mask.count_ones() as usize] * (v[mask | bit] - v[mask]);
        }
    }
    Ok(ColumnShap { base_value: v[0], prediction: v[n_masks - 1], values })
}
