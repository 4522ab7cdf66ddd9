//! Case generation, model training, Shapley explanations and counterfactual
//! search for predicting court-ordered rent reductions.

pub mod bundle;
pub mod casegen;
pub mod counterfactual;
pub mod digest;
pub mod error;
pub mod explain;
pub mod models;

pub use error::{
    BundleError, CounterfactualError, EncodeError, ExplainError, LabelError, ModelError, RenderError, SampleError,
    SchemaError, TrainError,
};
