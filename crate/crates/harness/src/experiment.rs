//! One ingest, encode, split, train, predict and score pass.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use krk_core::data::{encode, encode_with, split, EncodedMatrix, SplitSpec};
use krk_core::eval::{confusion, metrics, ConfusionMatrix, MetricsReport};
use krk_core::label::ClassLabel;
use krk_core::models::{ModelKind, Registry, TrainedModel};
use krk_core::netscript::{self, LayerKind, LayerSize};
use krk_service::{save_model, TrainingManifest};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::config::{ExperimentConfig, ResolvedConfig};
use crate::dataset::Dataset;
use crate::report;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Encode,
    Split,
    Train,
    Predict,
    Metrics,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Encode => "encode",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Metrics => "metrics",
            Stage::Write => "write",
        };
        f.write_str(name)
    }
}

type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct ExperimentError {
    pub stage: Stage,
    #[source]
    pub source: BoxError,
}

impl ExperimentError {
    pub fn new(stage: Stage, source: impl Into<BoxError>) -> Self {
        ExperimentError {
            stage,
            source: source.into(),
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, ExperimentError>;
}

impl<T, E: Into<BoxError>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, ExperimentError> {
        self.map_err(|e| ExperimentError::new(stage, e))
    }
}

/// One line of a results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub label: String,
    pub model: ModelKind,
    /// The values this run's cell set, as requested before any fast caps.
    pub params: BTreeMap<String, Value>,
    pub overall_accuracy: f64,
    pub average_accuracy: f64,
    pub train_seconds: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub row: ResultRow,
    pub metrics: MetricsReport,
    pub confusion: ConfusionMatrix,
    pub model: TrainedModel,
    pub manifest: TrainingManifest,
}

/// Body of `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub row: ResultRow,
    pub metrics: MetricsReport,
    pub class_order: Vec<ClassLabel>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    let registry = Registry::standard();
    let resolved = cfg.resolve(&registry).at(Stage::Config)?;
    let dataset = Dataset::load(&resolved.dataset).at(Stage::Ingest)?;
    run_resolved(&dataset, &resolved, &registry, BTreeMap::new())
}

/// Runs on an already loaded dataset; `params` are recorded in the row.
pub fn run_resolved(
    dataset: &Dataset,
    cfg: &ResolvedConfig,
    registry: &Registry,
    params: BTreeMap<String, Value>,
) -> Result<ExperimentOutcome, ExperimentError> {
    let matrix = encode(&dataset.records, cfg.encoding).at(Stage::Encode)?;
    let (train, test) = split(&matrix, &cfg.split).at(Stage::Split)?;

    let algorithm = registry.get(cfg.kind.name()).at(Stage::Config)?;
    let started = Instant::now();
    let model = algorithm.train(&train, &cfg.config).at(Stage::Train)?;
    let train_seconds = started.elapsed().as_secs_f64();

    let (metrics, confusion) = evaluate(&model, &test)?;
    let label = if params.is_empty() {
        cfg.kind.name().to_string()
    } else {
        describe_params(&params)
    };
    let row = ResultRow {
        label,
        model: cfg.kind,
        params,
        overall_accuracy: metrics.overall_accuracy,
        average_accuracy: metrics.average_accuracy,
        train_seconds,
        seed: cfg.seed(),
    };
    let manifest = TrainingManifest {
        algorithm: cfg.kind,
        config: cfg.config.clone(),
        encoding: cfg.encoding,
        split: cfg.split,
        dataset: dataset.source.to_string(),
        dataset_sha256: dataset.sha256.clone(),
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
        train_seconds,
        metrics: Some(metrics),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let outcome = ExperimentOutcome {
        row,
        metrics,
        confusion,
        model,
        manifest,
    };
    if let Some(dir) = &cfg.output_dir {
        write_outputs(&outcome, dir)?;
    }
    Ok(outcome)
}

/// Scores `model` on `test`.
pub fn evaluate(
    model: &TrainedModel,
    test: &EncodedMatrix,
) -> Result<(MetricsReport, ConfusionMatrix), ExperimentError> {
    let predicted = model.predict_matrix(test).at(Stage::Predict)?;
    let cm = confusion(&test.labels, &predicted).at(Stage::Metrics)?;
    let report = metrics(&cm).at(Stage::Metrics)?;
    Ok((report, cm))
}

/// Re-encodes `dataset` with the model's own encoder, splits it with `spec`
/// and scores the test part.
pub fn evaluate_on(
    model: &TrainedModel,
    dataset: &Dataset,
    spec: &SplitSpec,
) -> Result<(MetricsReport, ConfusionMatrix), ExperimentError> {
    let matrix = encode_with(&dataset.records, &model.encoder);
    let (_, test) = split(&matrix, spec).at(Stage::Split)?;
    evaluate(model, &test)
}

/// Writes `manifest.json`, `model.json`, `report.json`, `report.csv` and
/// `report.txt` into `dir`.
pub fn write_outputs(outcome: &ExperimentOutcome, dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).at(Stage::Write)?;
    fs::write(dir.join("manifest.json"), pretty(&outcome.manifest)).at(Stage::Write)?;
    save_model(&dir.join("model.json"), &outcome.model, Some(outcome.manifest.clone())).at(Stage::Write)?;
    let report = RunReport {
        row: outcome.row.clone(),
        metrics: outcome.metrics,
        class_order: outcome.model.class_order.clone(),
        confusion: outcome.confusion.rows(),
    };
    fs::write(dir.join("report.json"), pretty(&report)).at(Stage::Write)?;
    report::write_rows_csv(&dir.join("report.csv"), std::slice::from_ref(&outcome.row)).at(Stage::Write)?;
    fs::write(
        dir.join("report.txt"),
        format!("{}\n{}", outcome.row.label, outcome.metrics),
    )
    .at(Stage::Write)?;
    Ok(())
}

fn pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

/// `key=value` pairs. A topology script shows as its hidden layer sizes.
pub fn describe_params(params: &BTreeMap<String, Value>) -> String {
    params
        .iter()
        .map(|(k, v)| format!("{k}={}", short_value(k, v)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn short_value(key: &str, v: &Value) -> String {
    match v {
        Value::String(s) if key == "netscript" => match netscript::parse(s) {
            Ok(ast) => ast
                .layers
                .iter()
                .filter(|l| l.kind == LayerKind::Hidden)
                .map(|l| match l.size {
                    LayerSize::Fixed(n) => n.to_string(),
                    LayerSize::Auto => "auto".into(),
                })
                .collect::<Vec<_>>()
                .join("-"),
            Err(_) => "invalid".into(),
        },
        Value::String(s) => s.clone(),
        Value::Object(m) => match m.get("kind") {
            Some(Value::String(kind)) => kind.clone(),
            _ => v.to_string(),
        },
        _ => v.to_string(),
    }
}
