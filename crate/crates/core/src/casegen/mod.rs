//! Feature schema, constrained case sampling, deed rendering, label
//! ingestion and encoding.

mod case;
mod encode;
mod labels;
mod oracle;
mod render;
mod sample;
mod schema;

pub use case::{validate_case, CaseRecord, FeatureValue, ReductionLabel, ValidationReport, Violation};
pub use encode::{encode, EncodedFeature, EncodingMap};
pub use labels::{
    ingest_labels, read_label_file, write_label_file, Dataset, DuplicatePolicy, IngestReport, LabelRow,
    LabeledCase,
};
pub use oracle::{oracle_label, simulate_answers, OracleConfig, OracleTerm};
pub use render::{format_italian, placeholders, render_document, render_value, DOES_NOT_ORDER, ORDERS};
pub use sample::{sample_cases, sample_cases_with, SampleConfig, DEFAULT_REJECTION_CAP};
pub use schema::{
    load_schema, CmpOp, Condition, Constraint, ConstraintRule, FeatureKind, FeatureSchema, FeatureSpec,
    DEFAULT_SCHEMA_JSON,
};
