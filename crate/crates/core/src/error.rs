//! Error types for each pipeline stage.

use thiserror::Error;

/// Schema loading and validation failures.
#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("malformed schema document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema validation failed: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("requested zero cases")]
    ZeroCases,
    #[error("constraints look unsatisfiable: {rejections} consecutive rejections while sampling case {case_index}")]
    Unsatisfiable { case_index: usize, rejections: usize },
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("template placeholder `{0}` does not resolve to a feature value")]
    UnresolvedPlaceholder(String),
    #[error("unterminated placeholder in template")]
    UnterminatedPlaceholder,
}

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("feature `{0}` is missing from the case")]
    MissingFeature(String),
    #[error("feature `{feature}` has unknown category `{value}`")]
    UnknownCategory { feature: String, value: String },
    #[error("feature `{feature}` expects a {expected} value")]
    WrongType { feature: String, expected: &'static str },
    #[error("vector has {got} columns, encoding expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("feature `{0}` is not part of the schema")]
    UnknownFeature(String),
}

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("label file: {0}")]
    Csv(#[from] csv::Error),
    #[error("label row {row}: unknown case_id `{case_id}`")]
    UnknownCase { row: usize, case_id: String },
    #[error("label row {row}: {message}")]
    OutOfDomain { row: usize, message: String },
    #[error("case `{case_id}` failed encoding: {source}")]
    Encode {
        case_id: String,
        #[source]
        source: EncodeError,
    },
    #[error("dataset matrix: {0}")]
    Matrix(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty training data")]
    Empty,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("label {0} outside [0, 1]")]
    LabelRange(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("need 2 <= k <= n, got k = {k}, n = {n}")]
    FoldCount { k: usize, n: usize },
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<ModelError>,
    },
    #[error("least squares solve failed: {0}")]
    Solve(String),
}

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("background set is empty")]
    EmptyBackground,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("brute-force enumeration supports at most {max} columns, got {got}")]
    TooManyColumns { max: usize, got: usize },
    #[error("unknown plot kind `{0}`")]
    UnknownPlotKind(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("{0}")]
    MissingInput(&'static str),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

#[derive(Debug, Error)]
pub enum CounterfactualError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature `{0}` is not used by the model and cannot be searched")]
    NotEncoded(String),
    #[error("no feasible candidate values for feature `{0}`")]
    EmptyGrid(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error(transparent)]
    Encode(#[from] EncodeError),
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bundle header missing or malformed")]
    BadHeader,
    #[error("unsupported bundle version {0}")]
    UnsupportedVersion(u32),
    #[error("digest mismatch: header says {expected}, content hashes to {actual}")]
    DigestMismatch { expected: String, actual: String },
    #[error("bundle body: {0}")]
    Body(#[from] serde_json::Error),
    #[error("bundle schema digest {bundle} does not match encoding digest {encoding}")]
    SchemaMismatch { bundle: String, encoding: String },
    #[error("inconsistent bundle: {0}")]
    Inconsistent(String),
}

impl BundleError {
    pub(crate) fn inconsistent(message: impl Into<String>) -> Self {
        Self::Inconsistent(message.into())
    }
}

/// Failures while turning a dataset into a model bundle.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
}
