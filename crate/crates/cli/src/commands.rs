use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use tracing::{info, warn};

use leasefair_core::bundle::{load_bundle, save_bundle, train_bundle, TrainConfig};
use leasefair_core::casegen::{
    ingest_labels, load_schema, read_label_file, render_document, sample_cases, simulate_answers, validate_case,
    write_label_file, CaseRecord, Dataset, DuplicatePolicy, FeatureSchema, OracleConfig,
};
use leasefair_core::counterfactual::{counterfactuals_for_top_k, Direction, GridConfig, SearchOutcome, Target};
use leasefair_core::explain::{plot_payload, prune_features, Explanation, PlotKind, PlotPayload};
use leasefair_core::models::{cross_validate, fit_constant, CvReport, ForestParams, MlpParams, ModelSpec};
use leasefair_core::{
    BundleError, CounterfactualError, EncodeError, ExplainError, LabelError, ModelError, RenderError, SampleError,
    SchemaError, TrainError,
};
use leasefair_service::ServiceConfig;

use crate::manifest::ManifestBuilder;
use crate::{Cli, Command, DirectionArg, Duplicates, ForestArgs, MlpArgs};

/// Raised for bad inputs the core library does not see.
#[derive(Debug)]
pub struct InvalidInput(pub String);

impl std::fmt::Display for InvalidInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvalidInput {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    InvalidInput(msg.into()).into()
}

/// Machine-readable code for the innermost known error in the chain.
pub fn error_code(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if cause.is::<InvalidInput>() {
            return "invalid_input";
        }
        if cause.is::<SchemaError>() {
            return "invalid_schema";
        }
        if cause.is::<SampleError>() {
            return "sampling_failed";
        }
        if cause.is::<RenderError>() {
            return "render_failed";
        }
        if cause.is::<EncodeError>() {
            return "encoding_failed";
        }
        if cause.is::<LabelError>() {
            return "invalid_labels";
        }
        if cause.is::<ModelError>() {
            return "model_error";
        }
        if cause.is::<ExplainError>() {
            return "explain_error";
        }
        if cause.is::<CounterfactualError>() {
            return "counterfactual_error";
        }
        if cause.is::<BundleError>() {
            return "bundle_error";
        }
        if cause.is::<TrainError>() {
            return "training_failed";
        }
        if cause.is::<serde_json::Error>() {
            return "malformed_json";
        }
        if cause.is::<std::io::Error>() {
            return "io_error";
        }
    }
    "error"
}

fn read_json<T: DeserializeOwned>(bytes: &[u8], path: &Path) -> Result<T> {
    serde_json::from_slice(bytes).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_vec_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn load_schema_arg(path: Option<&Path>, m: &mut ManifestBuilder) -> Result<FeatureSchema> {
    match path {
        None => Ok(FeatureSchema::default_schema()),
        Some(p) => {
            let bytes = m.input(p)?;
            let text = String::from_utf8(bytes).map_err(|_| invalid(format!("{} is not UTF-8", p.display())))?;
            Ok(load_schema(&text).with_context(|| format!("loading schema {}", p.display()))?)
        }
    }
}

fn load_dataset(path: &Path, schema: &FeatureSchema, m: &mut ManifestBuilder) -> Result<Dataset> {
    let ds: Dataset = read_json(&m.input(path)?, path)?;
    if ds.schema_digest != schema.digest() {
        return Err(invalid(format!("dataset {} was built for a different schema", path.display())));
    }
    Ok(ds)
}

fn select_cases(cases: Vec<CaseRecord>, case_id: Option<&str>) -> Result<Vec<CaseRecord>> {
    let cases = match case_id {
        Some(id) => cases.into_iter().filter(|c| c.case_id == id).collect::<Vec<_>>(),
        None => cases,
    };
    if cases.is_empty() {
        return Err(invalid(match case_id {
            Some(id) => format!("no case with id `{id}`"),
            None => "case file is empty".to_string(),
        }));
    }
    Ok(cases)
}

fn check_cases(schema: &FeatureSchema, cases: &[CaseRecord]) -> Result<()> {
    for c in cases {
        let report = validate_case(schema, c);
        if !report.is_empty() {
            let ids: Vec<&str> = report.ids().collect();
            return Err(invalid(format!("case `{}` is invalid: {}", c.case_id, ids.join(", "))));
        }
    }
    Ok(())
}

fn forest_params(f: &ForestArgs) -> ForestParams {
    ForestParams { n_trees: f.trees, min_samples_split: f.min_split, ..ForestParams::default() }
}

fn mlp_params(a: &MlpArgs) -> MlpParams {
    MlpParams { epochs: a.epochs, batch_size: a.batch, ..MlpParams::default() }
}

fn direction(d: DirectionArg) -> Direction {
    match d {
        DirectionArg::Up => Direction::Up,
        DirectionArg::Down => Direction::Down,
        DirectionArg::Either => Direction::Either,
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CaseExplanation {
    pub case_id: String,
    pub explanation: Explanation,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExplainOutput {
    pub digest: String,
    pub plot: PlotKind,
    pub explanations: Vec<CaseExplanation>,
    pub payload: PlotPayload,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CaseCounterfactuals {
    pub case_id: String,
    pub prediction: f64,
    pub results: Vec<SearchOutcome>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CounterfactualOutput {
    pub digest: String,
    pub target: Target,
    pub k: usize,
    pub queries: Vec<CaseCounterfactuals>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvaluationOutput {
    pub k: usize,
    pub seed: u64,
    pub reports: Vec<CvReport>,
    /// Grid argmin of the constant sweep over all labels.
    pub best_constant: f64,
}

pub fn run(cli: Cli) -> Result<()> {
    let schema_path = cli.schema.as_deref();
    match cli.command {
        Command::GenCases { n, seed, out } => {
            let mut m = ManifestBuilder::start("gen-cases");
            m.seed("sample", seed);
            let schema = load_schema_arg(schema_path, &mut m)?;
            let cases = sample_cases(&schema, n, seed)?;
            write_json(&out, &cases)?;
            m.output(&out).finish(&out)?;
            info!("wrote {} cases to {}", cases.len(), out.display());
        }
        Command::RenderDocs { cases, out } => {
            let mut m = ManifestBuilder::start("render-docs");
            let schema = load_schema_arg(schema_path, &mut m)?;
            let cases: Vec<CaseRecord> = read_json(&m.input(&cases)?, &cases)?;
            fs::create_dir_all(&out)?;
            for c in &cases {
                let path = out.join(format!("{}.txt", c.case_id));
                fs::write(&path, render_document(&schema, c)?)?;
                m.output(&path);
            }
            m.finish(&out)?;
            info!("rendered {} deeds into {}", cases.len(), out.display());
        }
        Command::IngestLabels { cases, labels, duplicates, out } => {
            let mut m = ManifestBuilder::start("ingest-labels");
            let schema = load_schema_arg(schema_path, &mut m)?;
            let cases: Vec<CaseRecord> = read_json(&m.input(&cases)?, &cases)?;
            let rows = read_label_file(m.input(&labels)?.as_slice())?;
            let policy = match duplicates {
                Duplicates::LastWins => DuplicatePolicy::LastWins,
                Duplicates::FirstWins => DuplicatePolicy::FirstWins,
            };
            let report = ingest_labels(&schema, &cases, &rows, policy)?;
            for w in &report.warnings {
                warn!("{w}");
            }
            write_json(&out, &report.dataset)?;
            m.output(&out).finish(&out)?;
            info!("{} labeled, {} unlabeled, {} duplicated", report.dataset.len(), report.unlabeled, report.duplicates.len());
        }
        Command::OracleLabel { cases, oracle, answered, seed, labels_out, out } => {
            let mut m = ManifestBuilder::start("oracle-label");
            m.seed("oracle", seed);
            let schema = load_schema_arg(schema_path, &mut m)?;
            let cases: Vec<CaseRecord> = read_json(&m.input(&cases)?, &cases)?;
            let oracle = match oracle {
                Some(p) => read_json::<OracleConfig>(&m.input(&p)?, &p)?,
                None => OracleConfig::three_feature(),
            };
            oracle.validate(&schema)?;
            let rows = simulate_answers(&schema, &cases, &oracle, answered.unwrap_or(cases.len()), seed);
            if let Some(p) = &labels_out {
                write_label_file(fs::File::create(p)?, &rows)?;
                m.output(p);
            }
            let report = ingest_labels(&schema, &cases, &rows, DuplicatePolicy::default())?;
            write_json(&out, &report.dataset)?;
            m.output(&out).finish(&out)?;
            info!("{} labeled, {} unlabeled", report.dataset.len(), report.unlabeled);
        }
        Command::Train { dataset, forest, seed, background, k, out } => {
            let mut m = ManifestBuilder::start("train");
            m.seed("train", seed);
            let schema = load_schema_arg(schema_path, &mut m)?;
            let ds = load_dataset(&dataset, &schema, &mut m)?;
            let config = TrainConfig {
                forest: forest_params(&forest),
                seed,
                background_size: background,
                cv_folds: k,
                importance: true,
            };
            let bundle = train_bundle(&schema, &ds, &config)?;
            let digest = save_bundle(&bundle, &out)?;
            m.output(&out).finish(&out)?;
            println!("{digest}");
        }
        Command::Evaluate { dataset, k, seed, forest, mlp, out } => {
            let mut m = ManifestBuilder::start("evaluate");
            m.seed("cv", seed);
            let schema = load_schema_arg(schema_path, &mut m)?;
            let ds = load_dataset(&dataset, &schema, &mut m)?;
            let matrix = ds.feature_matrix()?;
            let mut reports = Vec::new();
            for spec in ModelSpec::standard_suite(forest_params(&forest), mlp_params(&mlp)) {
                info!("cross-validating {}", spec.label());
                reports.push(cross_validate(&spec, &matrix, k, seed)?);
            }
            let best_constant = fit_constant(matrix.labels(), 0.01)?.model.value;
            println!("{:<10} {:>10} {:>10} {:>10}", "model", "mean_mae", "min_fold", "max_fold");
            for r in &reports {
                let lo = r.fold_mae.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = r.fold_mae.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                println!("{:<10} {:>10.4} {:>10.4} {:>10.4}", r.model, r.mean_mae, lo, hi);
            }
            println!("best constant reduction: {best_constant:.2}");
            if let Some(out) = out {
                write_json(&out, &EvaluationOutput { k, seed, reports, best_constant })?;
                m.output(&out).finish(&out)?;
            }
        }
        Command::Prune { dataset, bundle, threshold, out } => {
            let mut m = ManifestBuilder::start("prune");
            let schema = load_schema_arg(schema_path, &mut m)?;
            let ds = load_dataset(&dataset, &schema, &mut m)?;
            m.input(&bundle)?;
            let b = load_bundle(&bundle)?;
            if b.schema.digest() != schema.digest() {
                return Err(invalid("bundle was trained on a different schema"));
            }
            let report = b.importance.as_ref().ok_or_else(|| invalid("bundle carries no importance report"))?;
            let result = prune_features(report, threshold);
            if result.kept.is_empty() {
                bail!(invalid(format!("no feature reaches the threshold {threshold}")));
            }
            let reduced = ds.project(&schema, &result.kept)?;
            write_json(&out, &reduced)?;
            let kept_path = out.with_extension("kept.json");
            write_json(&kept_path, &result)?;
            m.output(&out).output(&kept_path).finish(&out)?;
            println!("kept {} of {} features", result.kept.len(), report.features.len());
        }
        Command::Explain { bundle, cases, case_id, plot, feature, out } => {
            let mut m = ManifestBuilder::start("explain");
            m.input(&bundle)?;
            let b = load_bundle(&bundle)?;
            let kind: PlotKind = plot.parse()?;
            let cases: Vec<CaseRecord> = read_json(&m.input(&cases)?, &cases)?;
            let cases = select_cases(cases, case_id.as_deref())?;
            check_cases(&b.schema, &cases)?;
            let explanations = cases
                .iter()
                .map(|c| Ok(CaseExplanation { case_id: c.case_id.clone(), explanation: b.explain_case(c)? }))
                .collect::<Result<Vec<_>>>()?;
            let plain: Vec<Explanation> = explanations.iter().map(|e| e.explanation.clone()).collect();
            let payload = plot_payload(kind, &plain, feature.as_deref())?;
            write_json(&out, &ExplainOutput { digest: b.digest(), plot: kind, explanations, payload })?;
            m.output(&out).finish(&out)?;
        }
        Command::Counterfactual { bundle, cases, case_id, k, delta, direction: dir, grid_points, out } => {
            let mut m = ManifestBuilder::start("counterfactual");
            m.input(&bundle)?;
            let b = load_bundle(&bundle)?;
            let target = Target::Change { delta, direction: direction(dir) };
            target.validate()?;
            let grid = GridConfig { numeric_points: grid_points };
            let cases: Vec<CaseRecord> = read_json(&m.input(&cases)?, &cases)?;
            let cases = select_cases(cases, case_id.as_deref())?;
            check_cases(&b.schema, &cases)?;
            let queries = cases
                .iter()
                .map(|c| {
                    let e = b.explain_case(c)?;
                    let results = counterfactuals_for_top_k(&b.forest, &b.encoding, &b.schema, c, &e, k, &target, &grid);
                    Ok(CaseCounterfactuals { case_id: c.case_id.clone(), prediction: e.prediction, results })
                })
                .collect::<Result<Vec<_>>>()?;
            write_json(&out, &CounterfactualOutput { digest: b.digest(), target, k, queries })?;
            m.output(&out).finish(&out)?;
        }
        Command::Serve { bundle, addr, k, delta, grid_points } => {
            let b = load_bundle(&bundle)?;
            let config = ServiceConfig {
                default_k: k,
                default_target: Target::Change { delta, direction: Direction::Either },
                grid: GridConfig { numeric_points: grid_points },
                ..ServiceConfig::default()
            };
            config.default_target.validate()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(leasefair_service::serve(b, addr, config))?;
        }
    }
    Ok(())
}
