//! Stateless HTTP API over one immutable model bundle.
//!
//! | route                     | body                               |
//! |---------------------------|------------------------------------|
//! | `GET  /api/schema`        | the feature schema                 |
//! | `GET  /api/model`         | digest, training metadata, importance |
//! | `POST /api/predict`       | `{case}` → raw and display values  |
//! | `POST /api/explain`       | `{case}` → explanation + waterfall |
//! | `POST /api/counterfactual`| `{case, target?, k?, grid?}`       |
//! | `POST /api/cases/sample`  | `{n, seed}` → sampled cases        |
//!
//! Every error body is an [`ApiError`].

mod error;

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Request, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

pub use error::{ApiError, FieldError};

use leasefair_core::bundle::{ModelBundle, TrainingMetadata};
use leasefair_core::casegen::{sample_cases, validate_case, CaseRecord, FeatureSchema, FeatureValue};
use leasefair_core::counterfactual::{counterfactuals_for_top_k, GridConfig, SearchOutcome, Target};
use leasefair_core::explain::{plot_payload, Explanation, ImportanceReport, PlotKind, PlotPayload};
use leasefair_core::BundleError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub default_k: usize,
    pub default_target: Target,
    pub grid: GridConfig,
    /// Largest `n` accepted by the sampling endpoint.
    pub max_sample: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { default_k: 3, default_target: Target::default(), grid: GridConfig::default(), max_sample: 1000 }
    }
}

const MAX_GRID_POINTS: usize = 10_001;

struct AppState {
    bundle: ModelBundle,
    digest: String,
    config: ServiceConfig,
}

type Shared = State<Arc<AppState>>;

/// JSON body extractor whose rejections are [`ApiError`]s.
pub struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Self(v)),
            Err(JsonRejection::JsonSyntaxError(e)) => Err(ApiError::bad_request("malformed_json", e.body_text())),
            Err(JsonRejection::JsonDataError(e)) => Err(ApiError::unprocessable("invalid_request", e.body_text())),
            Err(JsonRejection::MissingJsonContentType(e)) => {
                Err(ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media_type", e.body_text()))
            }
            Err(other) => Err(ApiError::bad_request("bad_request", other.body_text())),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseRequest {
    #[serde(default)]
    pub case_id: Option<String>,
    pub case: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterfactualRequest {
    #[serde(default)]
    pub case_id: Option<String>,
    pub case: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub target: Option<Target>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRequest {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub base_value: f64,
    pub shap_sum: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    /// Unclamped forest output; explanations add up to this.
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub display: f64,
    pub digest: String,
    pub consistency: Consistency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainResponse {
    pub digest: String,
    pub explanation: Explanation,
    pub waterfall: PlotPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResponse {
    pub digest: String,
    pub prediction: f64,
    pub target: Target,
    pub results: Vec<SearchOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResponse {
    pub cases: Vec<CaseRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub digest: String,
    pub format_version: u32,
    pub schema_version: String,
    pub schema_digest: String,
    /// Raw features the model reads, in encoding order.
    pub features: Vec<String>,
    pub n_columns: usize,
    pub metadata: TrainingMetadata,
    pub importance: Option<ImportanceReport>,
}

/// Builds the router after checking the bundle is internally consistent.
pub fn router(bundle: ModelBundle, config: ServiceConfig) -> Result<Router, BundleError> {
    bundle.validate()?;
    let digest = bundle.digest();
    let state = Arc::new(AppState { bundle, digest, config });
    Ok(Router::new()
        .route("/api/schema", get(schema))
        .route("/api/model", get(model_info))
        .route("/api/predict", post(predict))
        .route("/api/explain", post(explain))
        .route("/api/counterfactual", post(counterfactual))
        .route("/api/cases/sample", post(sample))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .method_not_allowed_fallback(|| async {
            ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this route")
        })
        .with_state(state))
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(bundle: ModelBundle, addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let app = router(bundle, config).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Field-level checks first, then schema constraints.
pub fn parse_case(
    schema: &FeatureSchema,
    case_id: Option<String>,
    raw: &BTreeMap<String, serde_json::Value>,
) -> Result<CaseRecord, ApiError> {
    let mut details = Vec::new();
    let mut case = CaseRecord::new(case_id.unwrap_or_else(|| "request".to_string()));
    for spec in &schema.features {
        let Some(v) = raw.get(&spec.id) else {
            details.push(FieldError { field: spec.id.clone(), message: "required feature is missing".into() });
            continue;
        };
        match serde_json::from_value::<FeatureValue>(v.clone()) {
            Ok(value) => match value.check_kind(spec) {
                Ok(()) => case.set(&spec.id, value),
                Err(message) => details.push(FieldError { field: spec.id.clone(), message }),
            },
            Err(_) => details.push(FieldError {
                field: spec.id.clone(),
                message: format!("expected a {} value", spec.kind.as_str()),
            }),
        }
    }
    for key in raw.keys().filter(|k| schema.feature(k).is_none()) {
        details.push(FieldError { field: key.clone(), message: "unknown feature".into() });
    }
    if !details.is_empty() {
        return Err(ApiError::unprocessable("invalid_case", format!("case has {} invalid field(s)", details.len()))
            .with_details(details));
    }
    let report = validate_case(schema, &case);
    if !report.is_empty() {
        let details = report
            .violations
            .into_iter()
            .map(|v| FieldError { field: v.id, message: v.message })
            .collect();
        return Err(ApiError::unprocessable("constraint_violation", "case violates schema constraints")
            .with_details(details));
    }
    Ok(case)
}

fn explain_case(st: &AppState, case: &CaseRecord) -> Result<Explanation, ApiError> {
    st.bundle.explain_case(case).map_err(|e| ApiError::internal(e.to_string()))
}

async fn schema(State(st): Shared) -> Json<FeatureSchema> {
    Json(st.bundle.schema.clone())
}

async fn model_info(State(st): Shared) -> Json<ModelInfo> {
    let b = &st.bundle;
    Json(ModelInfo {
        digest: st.digest.clone(),
        format_version: b.format_version,
        schema_version: b.schema.version.clone(),
        schema_digest: b.encoding.schema_digest.clone(),
        features: b.encoding.feature_ids().map(str::to_string).collect(),
        n_columns: b.encoding.dim(),
        metadata: b.metadata.clone(),
        importance: b.importance.clone(),
    })
}

async fn predict(State(st): Shared, ApiJson(req): ApiJson<CaseRequest>) -> Result<Json<PredictResponse>, ApiError> {
    let case = parse_case(&st.bundle.schema, req.case_id, &req.case)?;
    let e = explain_case(&st, &case)?;
    Ok(Json(PredictResponse {
        raw: e.prediction,
        display: e.prediction.clamp(0.0, 1.0),
        digest: st.digest.clone(),
        consistency: Consistency {
            base_value: e.base_value,
            shap_sum: e.contributions.iter().map(|c| c.shap).sum(),
            prediction: e.prediction,
        },
    }))
}

async fn explain(State(st): Shared, ApiJson(req): ApiJson<CaseRequest>) -> Result<Json<ExplainResponse>, ApiError> {
    let case = parse_case(&st.bundle.schema, req.case_id, &req.case)?;
    let explanation = explain_case(&st, &case)?;
    let waterfall = plot_payload(PlotKind::Waterfall, std::slice::from_ref(&explanation), None)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(Json(ExplainResponse { digest: st.digest.clone(), explanation, waterfall }))
}

async fn counterfactual(
    State(st): Shared,
    ApiJson(req): ApiJson<CounterfactualRequest>,
) -> Result<Json<CounterfactualResponse>, ApiError> {
    let case = parse_case(&st.bundle.schema, req.case_id, &req.case)?;
    let target = req.target.unwrap_or(st.config.default_target);
    target.validate().map_err(|e| {
        ApiError::unprocessable("invalid_target", e.to_string())
            .with_details(vec![FieldError { field: "target".into(), message: e.to_string() }])
    })?;
    let k = req.k.unwrap_or(st.config.default_k);
    let grid = req.grid.unwrap_or(st.config.grid);
    if !(2..=MAX_GRID_POINTS).contains(&grid.numeric_points) {
        let message = format!("numeric_points must lie in 2..={MAX_GRID_POINTS}");
        return Err(ApiError::unprocessable("invalid_request", message.clone())
            .with_details(vec![FieldError { field: "grid.numeric_points".into(), message }]));
    }
    let explanation = explain_case(&st, &case)?;
    let b = &st.bundle;
    let results = counterfactuals_for_top_k(&b.forest, &b.encoding, &b.schema, &case, &explanation, k, &target, &grid);
    Ok(Json(CounterfactualResponse { digest: st.digest.clone(), prediction: explanation.prediction, target, results }))
}

async fn sample(State(st): Shared, ApiJson(req): ApiJson<SampleRequest>) -> Result<Json<SampleResponse>, ApiError> {
    if req.n == 0 || req.n > st.config.max_sample {
        let message = format!("n must lie in 1..={}", st.config.max_sample);
        return Err(ApiError::unprocessable("invalid_request", message.clone())
            .with_details(vec![FieldError { field: "n".into(), message }]));
    }
    let cases = sample_cases(&st.bundle.schema, req.n, req.seed)
        .map_err(|e| ApiError::unprocessable("sampling_failed", e.to_string()))?;
    Ok(Json(SampleResponse { cases }))
}
