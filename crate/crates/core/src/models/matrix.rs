use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Row-major encoded cases with their labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
    labels: Vec<f64>,
    columns: Vec<String>,
}

impl FeatureMatrix {
    /// Rejects ragged rows, non-finite entries and labels outside `[0, 1]`.
    /// Empty `columns` gets generated names `x0, x1, ...`.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<f64>, columns: Vec<String>) -> Result<Self, ModelError> {
        if rows.len() != labels.len() {
            return Err(ModelError::LengthMismatch(rows.len(), labels.len()));
        }
        let n_cols = if columns.is_empty() {
            rows.first().map_or(0, Vec::len)
        } else {
            columns.len()
        };
        let columns = if columns.is_empty() {
            (0..n_cols).map(|i| format!("x{i}")).collect()
        } else {
            columns
        };
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in &rows {
            if r.len() != n_cols {
                return Err(ModelError::LengthMismatch(r.len(), n_cols));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite("features"));
            }
            data.extend_from_slice(r);
        }
        for &y in &labels {
            if !y.is_finite() {
                return Err(ModelError::NonFinite("labels"));
            }
            if !(0.0..=1.0).contains(&y) {
                return Err(ModelError::LabelRange(y));
            }
        }
        Ok(Self { n_rows: rows.len(), n_cols, data, labels, columns })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    /// Rows at `indices`, in that order, duplicates allowed.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self { n_rows: indices.len(), n_cols: self.n_cols, data, labels, columns: self.columns.clone() }
    }

    /// Copy of the rows as owned vectors.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_input() {
        assert!(FeatureMatrix::from_rows(vec![vec![f64::NAN]], vec![0.1], vec![]).is_err());
        assert!(FeatureMatrix::from_rows(vec![vec![1.0]], vec![1.5], vec![]).is_err());
        assert!(FeatureMatrix::from_rows(vec![vec![1.0], vec![1.0, 2.0]], vec![0.1, 0.2], vec![]).is_err());
        assert!(FeatureMatrix::from_rows(vec![vec![1.0]], vec![], vec![]).is_err());
    }

    #[test]
    fn subset_keeps_duplicates() {
        let m = FeatureMatrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![0.1, 0.2], vec![]).unwrap();
        let s = m.subset(&[1, 1, 0]);
        assert_eq!(s.n_rows(), 3);
        assert_eq!(s.row(1), &[3.0, 4.0]);
        assert_eq!(s.labels(), &[0.2, 0.2, 0.1]);
        assert_eq!(m.columns(), &["x0", "x1"]);
    }
}
