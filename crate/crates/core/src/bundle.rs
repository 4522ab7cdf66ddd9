//! The deployable unit: schema, encoding, forest and background under one
//! digest.
//!
//! On disk a bundle is a header line `leasefair-bundle v<N> sha256=<hex>`
//! followed by the compact JSON body the digest covers.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::casegen::{CaseRecord, Dataset, EncodingMap, FeatureSchema};
use crate::digest::{sha256_hex, sha256_json};
use crate::error::{BundleError, EncodeError, ExplainError, TrainError};
use crate::explain::{global_importance, tree_shap, BackgroundSet, Explanation, ImportanceReport, DEFAULT_BACKGROUND_SIZE};
use crate::models::{cross_validate, fit_forest, CvReport, ForestParams, ModelSpec, RandomForest, Regressor};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "leasefair-bundle";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub params: ForestParams,
    pub n_rows: usize,
    pub background_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub schema: FeatureSchema,
    pub encoding: EncodingMap,
    pub forest: RandomForest,
    pub background: BackgroundSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<ImportanceReport>,
    pub metadata: TrainingMetadata,
}

impl ModelBundle {
    /// Digest of the serialized body; also what the file header records.
    pub fn digest(&self) -> String {
        sha256_json(self)
    }

    pub fn validate(&self) -> Result<(), BundleError> {
        let schema_digest = self.schema.digest();
        if self.encoding.schema_digest != schema_digest {
            return Err(BundleError::SchemaMismatch { bundle: schema_digest, encoding: self.encoding.schema_digest.clone() });
        }
        let d = self.encoding.dim();
        if self.forest.n_features != d {
            return Err(BundleError::inconsistent(format!("forest expects {} columns, encoding has {d}", self.forest.n_features)));
        }
        if self.background.is_empty() || self.background.dim() != d {
            return Err(BundleError::inconsistent("background rows do not match the encoding"));
        }
        if self.forest.trees.is_empty() {
            return Err(BundleError::inconsistent("forest has no trees"));
        }
        Ok(())
    }

    pub fn encode(&self, case: &CaseRecord) -> Result<Vec<f64>, EncodeError> {
        self.encoding.encode(case)
    }

    /// Raw forest output, not clamped.
    pub fn predict_case(&self, case: &CaseRecord) -> Result<f64, EncodeError> {
        Ok(self.forest.predict_row(&self.encode(case)?))
    }

    pub fn explain_case(&self, case: &CaseRecord) -> Result<Explanation, ExplainError> {
        let x = self.encode(case)?;
        tree_shap(&self.forest, &self.encoding, &x, &self.background)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, BundleError> {
        let body = serde_json::to_vec(self)?;
        let mut out = format!("{MAGIC} v{} sha256={}\n", self.format_version, sha256_hex(&body)).into_bytes();
        out.extend_from_slice(&body);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BundleError> {
        let nl = bytes.iter().position(|&b| b == b'\n').ok_or(BundleError::BadHeader)?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| BundleError::BadHeader)?;
        let mut parts = header.split(' ');
        if parts.next() != Some(MAGIC) {
            return Err(BundleError::BadHeader);
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.strip_prefix('v'))
            .and_then(|v| v.parse().ok())
            .ok_or(BundleError::BadHeader)?;
        if version != BUNDLE_FORMAT_VERSION {
            return Err(BundleError::UnsupportedVersion(version));
        }
        let expected = parts.next().and_then(|d| d.strip_prefix("sha256=")).ok_or(BundleError::BadHeader)?;
        let body = &bytes[nl + 1..];
        let actual = sha256_hex(body);
        if actual != expected {
            return Err(BundleError::DigestMismatch { expected: expected.to_string(), actual });
        }
        let bundle: ModelBundle = serde_json::from_slice(body)?;
        if bundle.format_version != version {
            return Err(BundleError::UnsupportedVersion(bundle.format_version));
        }
        bundle.validate()?;
        Ok(bundle)
    }
}

/// Writes the bundle and returns its digest.
pub fn save_bundle(bundle: &ModelBundle, path: &Path) -> Result<String, BundleError> {
    bundle.validate()?;
    fs::write(path, bundle.to_bytes()?)?;
    Ok(bundle.digest())
}

pub fn load_bundle(path: &Path) -> Result<ModelBundle, BundleError> {
    ModelBundle::from_bytes(&fs::read(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub forest: ForestParams,
    pub seed: u64,
    pub background_size: usize,
    /// Fold count for an optional cross-validation report.
    pub cv_folds: Option<usize>,
    /// Compute the importance report over the training rows.
    pub importance: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            forest: ForestParams::default(),
            seed: 0,
            background_size: DEFAULT_BACKGROUND_SIZE,
            cv_folds: None,
            importance: true,
        }
    }
}

/// Fits the forest on the whole dataset and packages everything needed to
/// serve and explain it.
pub fn train_bundle(schema: &FeatureSchema, dataset: &Dataset, config: &TrainConfig) -> Result<ModelBundle, TrainError> {
    if dataset.encoding.schema_digest != schema.digest() {
        return Err(BundleError::SchemaMismatch {
            bundle: schema.digest(),
            encoding: dataset.encoding.schema_digest.clone(),
        }
        .into());
    }
    let matrix = dataset.feature_matrix()?;
    let forest = fit_forest(&matrix, &config.forest, config.seed)?;
    let background = BackgroundSet::sample_from(&matrix, config.background_size, config.seed)?;
    let cv = match config.cv_folds {
        Some(k) => Some(cross_validate(&ModelSpec::Forest(config.forest.clone()), &matrix, k, config.seed)?),
        None => None,
    };
    let importance = if config.importance {
        Some(global_importance(&forest, &dataset.encoding, &matrix, &background)?)
    } else {
        None
    };
    Ok(ModelBundle {
        format_version: BUNDLE_FORMAT_VERSION,
        schema: schema.clone(),
        encoding: dataset.encoding.clone(),
        forest,
        metadata: TrainingMetadata {
            seed: config.seed,
            params: config.forest.clone(),
            n_rows: matrix.n_rows(),
            background_size: background.len(),
            cv,
        },
        background,
        importance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casegen::{ingest_labels, oracle_label, sample_cases, DuplicatePolicy, LabelRow, OracleConfig};

    fn small_bundle(seed: u64) -> ModelBundle {
        let schema = FeatureSchema::default_schema();
        let cases = sample_cases(&schema, 80, seed).unwrap();
        let oracle = OracleConfig::three_feature();
        let rows: Vec<LabelRow> =
            cases.iter().map(|c| LabelRow::from_label(&c.case_id, oracle_label(&schema, c, &oracle, seed))).collect();
        let ds = ingest_labels(&schema, &cases, &rows, DuplicatePolicy::default()).unwrap().dataset;
        let cfg = TrainConfig {
            forest: ForestParams { n_trees: 5, ..ForestParams::default() },
            seed,
            background_size: 16,
            ..TrainConfig::default()
        };
        train_bundle(&schema, &ds, &cfg).unwrap()
    }

    #[test]
    fn bytes_round_trip() {
        let b = small_bundle(1);
        let bytes = b.to_bytes().unwrap();
        assert!(bytes.starts_with(b"leasefair-bundle v1 sha256="));
        let back = ModelBundle::from_bytes(&bytes).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.digest(), b.digest());
    }

    #[test]
    fn truncated_and_tampered_files_fail() {
        let bytes = small_bundle(2).to_bytes().unwrap();
        let cut = &bytes[..bytes.len() - 10];
        assert!(matches!(ModelBundle::from_bytes(cut), Err(BundleError::DigestMismatch { .. })));
        assert!(matches!(ModelBundle::from_bytes(&bytes[..10]), Err(BundleError::BadHeader)));
        let mut v2 = bytes.clone();
        let pos = v2.iter().position(|&c| c == b'1').unwrap();
        v2[pos] = b'2';
        assert!(matches!(ModelBundle::from_bytes(&v2), Err(BundleError::UnsupportedVersion(2))));
    }

    #[test]
    fn schema_mismatch_detected() {
        let mut b = small_bundle(3);
        b.encoding.schema_digest = "0".repeat(64);
        assert!(matches!(b.validate(), Err(BundleError::SchemaMismatch { .. })));
    }
}
