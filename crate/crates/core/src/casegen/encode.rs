use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::case::{CaseRecord, FeatureValue};
use super::schema::{FeatureKind, FeatureSchema};
use crate::error::EncodeError;

/// Where one raw feature lives in the encoded vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedFeature {
    pub id: String,
    pub kind: FeatureKind,
    pub offset: usize,
    pub width: usize,
    /// One-hot column order for categoricals.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

/// Stable mapping from raw features to numeric columns. Numbers pass through,
/// booleans become 0/1, categoricals expand one-hot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingMap {
    pub schema_version: String,
    pub schema_digest: String,
    pub features: Vec<EncodedFeature>,
    pub columns: Vec<String>,
}

impl EncodingMap {
    pub fn from_schema(schema: &FeatureSchema) -> Self {
        Self::build(schema, schema.features.iter().map(|f| f.id.as_str()))
            .expect("ids come from the schema")
    }

    /// Encoding restricted to `kept` features, still in schema order.
    pub fn restricted(schema: &FeatureSchema, kept: &[String]) -> Result<Self, EncodeError> {
        for id in kept {
            if schema.feature(id).is_none() {
                return Err(EncodeError::UnknownFeature(id.clone()));
            }
        }
        Self::build(
            schema,
            schema.feature_ids().filter(|id| kept.iter().any(|k| k == id)),
        )
    }

    fn build<'a>(schema: &FeatureSchema, ids: impl Iterator<Item = &'a str>) -> Result<Self, EncodeError> {
        let mut features = Vec::new();
        let mut columns = Vec::new();
        for id in ids {
            let spec = schema.feature(id).ok_or_else(|| EncodeError::UnknownFeature(id.into()))?;
            let offset = columns.len();
            if spec.kind == FeatureKind::Categorical {
                for c in &spec.categories {
                    columns.push(format!("{id}={c}"));
                }
            } else {
                columns.push(id.to_string());
            }
            features.push(EncodedFeature {
                id: id.to_string(),
                kind: spec.kind,
                offset,
                width: columns.len() - offset,
                categories: if spec.kind == FeatureKind::Categorical {
                    spec.categories.clone()
                } else {
                    Vec::new()
                },
            });
        }
        Ok(Self {
            schema_version: schema.version.clone(),
            schema_digest: schema.digest(),
            features,
            columns,
        })
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_ids(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.id.as_str())
    }

    pub fn feature(&self, id: &str) -> Option<&EncodedFeature> {
        self.features.iter().find(|f| f.id == id)
    }

    /// Raw-feature index for every column.
    pub fn column_owners(&self) -> Vec<usize> {
        let mut owners = vec![0; self.dim()];
        for (i, f) in self.features.iter().enumerate() {
            owners[f.offset..f.offset + f.width].fill(i);
        }
        owners
    }

    pub fn encode(&self, case: &CaseRecord) -> Result<Vec<f64>, EncodeError> {
        let mut out = vec![0.0; self.dim()];
        for f in &self.features {
            let value = case.get(&f.id).ok_or_else(|| EncodeError::MissingFeature(f.id.clone()))?;
            match f.kind {
                FeatureKind::Categorical => {
                    let cat = value.as_category().ok_or_else(|| EncodeError::WrongType {
                        feature: f.id.clone(),
                        expected: "categorical",
                    })?;
                    let idx = f.categories.iter().position(|c| c == cat).ok_or_else(|| {
                        EncodeError::UnknownCategory { feature: f.id.clone(), value: cat.to_string() }
                    })?;
                    out[f.offset + idx] = 1.0;
                }
                FeatureKind::Boolean => {
                    let b = value.as_bool().ok_or_else(|| EncodeError::WrongType {
                        feature: f.id.clone(),
                        expected: "boolean",
                    })?;
                    out[f.offset] = if b { 1.0 } else { 0.0 };
                }
                _ => {
                    out[f.offset] = value.as_number().ok_or_else(|| EncodeError::WrongType {
                        feature: f.id.clone(),
                        expected: "numeric",
                    })?;
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`encode`](Self::encode) for the encoded features.
    pub fn decode(&self, vector: &[f64]) -> Result<BTreeMap<String, FeatureValue>, EncodeError> {
        if vector.len() != self.dim() {
            return Err(EncodeError::Dimension { expected: self.dim(), got: vector.len() });
        }
        let mut out = BTreeMap::new();
        for f in &self.features {
            let cols = &vector[f.offset..f.offset + f.width];
            let value = match f.kind {
                FeatureKind::Categorical => {
                    let idx = cols
                        .iter()
                        .enumerate()
                        .fold(0, |best, (i, v)| if *v > cols[best] { i } else { best });
                    FeatureValue::Category(f.categories[idx].clone())
                }
                FeatureKind::Boolean => FeatureValue::Bool(cols[0] >= 0.5),
                FeatureKind::Integer => FeatureValue::Number(cols[0].round()),
                _ => FeatureValue::Number(cols[0]),
            };
            out.insert(f.id.clone(), value);
        }
        Ok(out)
    }
}

/// Encodes against the full schema.
pub fn encode(schema: &FeatureSchema, case: &CaseRecord) -> Result<Vec<f64>, EncodeError> {
    EncodingMap::from_schema(schema).encode(case)
}
