//! HTTP/JSON endpoints over an immutable tablebase, the exported dataset and
//! a swappable snapshot of loaded models.

use std::collections::BTreeMap;
use std::fs;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use krk_core::chess::{canonicalize, legal_black_moves, status, Position, Side, Square, Status};
use krk_core::data::{statistics, Record};
use krk_core::eval::MetricsReport;
use krk_core::label::{ClassLabel, GameValue};
use krk_core::models::{ModelKind, TrainedModel};
use krk_core::oracle::{classify, Tablebase};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::artifact::{load_model, ArtifactError, TrainingManifest};

pub const MAX_PAGE: usize = 1000;
const DEFAULT_PAGE: usize = 50;

pub struct ModelEntry {
    pub id: String,
    pub model: TrainedModel,
    pub manifest: Option<TrainingManifest>,
}

#[derive(Default)]
pub struct ModelSnapshot {
    models: BTreeMap<String, Arc<ModelEntry>>,
}

impl ModelSnapshot {
    pub fn new(entries: Vec<ModelEntry>) -> Self {
        ModelSnapshot {
            models: entries.into_iter().map(|e| (e.id.clone(), Arc::new(e))).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&Arc<ModelEntry>> {
        self.models.get(id)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &Arc<ModelEntry>> {
        self.models.values()
    }
}

struct Shared {
    tablebase: Tablebase,
    records: Vec<Record>,
    models: RwLock<Arc<ModelSnapshot>>,
}

/// Handler state. Cloning is cheap; all clones see the same snapshot.
#[derive(Clone)]
pub struct AppState {
    shared: Arc<Shared>,
}

impl AppState {
    pub fn new(tablebase: Tablebase, records: Vec<Record>, models: Vec<ModelEntry>) -> Self {
        AppState {
            shared: Arc::new(Shared {
                tablebase,
                records,
                models: RwLock::new(Arc::new(ModelSnapshot::new(models))),
            }),
        }
    }

    pub fn snapshot(&self) -> Arc<ModelSnapshot> {
        self.shared.models.read().expect("model lock").clone()
    }

    /// Atomically replaces the model set; in-flight requests keep the old one.
    pub fn replace_models(&self, models: Vec<ModelEntry>) {
        *self.shared.models.write().expect("model lock") = Arc::new(ModelSnapshot::new(models));
    }
}

/// Loads `DIR/<id>/model.json` and `DIR/<id>.model.json` artifacts.
pub fn load_model_dir(dir: &Path) -> Result<Vec<ModelEntry>, ArtifactError> {
    let mut entries = Vec::new();
    for item in fs::read_dir(dir)? {
        let path = item?.path();
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        let (id, file) = if path.is_dir() {
            (name, path.join("model.json"))
        } else if let Some(stem) = name.strip_suffix(".model.json") {
            (stem.to_string(), path.clone())
        } else {
            continue;
        };
        if !file.is_file() {
            continue;
        }
        let (model, manifest) = load_model(&file)?;
        entries.push(ModelEntry { id, model, manifest });
    }
    entries.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(entries)
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    pub code: &'static str,
    pub message: String,
    /// Violated legality rule, for illegal positions.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<&'static str>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            rule: None,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        let status = match r {
            JsonRejection::MissingJsonContentType(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, "malformed_request", r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "malformed_query", r.body_text())
    }
}

fn parse_square(field: &str, text: &str) -> Result<Square, ApiError> {
    text.parse()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "malformed_square", format!("{field}: {e}")))
}

fn parse_position(wk: &str, wr: &str, bk: &str) -> Result<Position, ApiError> {
    let (wk, wr, bk) = (
        parse_square("wk", wk)?,
        parse_square("wr", wr)?,
        parse_square("bk", bk)?,
    );
    Position::new(wk, wr, bk, Side::Black).map_err(|e| ApiError {
        rule: Some(e.rule()),
        ..ApiError::new(StatusCode::BAD_REQUEST, "illegal_position", e.to_string())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Squares {
    pub wk: Square,
    pub wr: Square,
    pub bk: Square,
}

impl From<&Position> for Squares {
    fn from(p: &Position) -> Self {
        Squares {
            wk: p.wk,
            wr: p.wr,
            bk: p.bk,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PredictRequest {
    pub wk: String,
    pub wr: String,
    pub bk: String,
    pub model_id: String,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedScore {
    pub label: ClassLabel,
    pub score: f64,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictResponse {
    pub model_id: String,
    pub kind: ModelKind,
    /// The orbit representative the model and oracle were queried with.
    pub canonical: Squares,
    pub predicted_class: ClassLabel,
    pub scores: Vec<NamedScore>,
    pub oracle_class: ClassLabel,
    pub agreement: bool,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub id: String,
    pub kind: ModelKind,
    pub fingerprint: String,
    pub input_width: usize,
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub label: ClassLabel,
    pub count: usize,
    /// Rounded to two decimals.
    pub percent: f64,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsResponse {
    pub total: usize,
    pub classes: Vec<StatRow>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub index: usize,
    pub wk: Square,
    pub wr: Square,
    pub bk: Square,
    pub label: ClassLabel,
    pub line: String,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplesResponse {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub records: Vec<Sample>,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyResponse {
    pub position: Squares,
    pub canonical: Squares,
    pub label: ClassLabel,
    pub value: GameValue,
    pub status: String,
    pub black_moves: Vec<Square>,
    pub can_capture_rook: bool,
}

#[derive(Debug, Deserialize)]
struct SquaresQuery {
    wk: Option<String>,
    wr: Option<String>,
    bk: Option<String>,
}

#[derive(Debug, Deserialize)]
struct PageQuery {
    offset: Option<usize>,
    limit: Option<usize>,
}

async fn health(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "records": state.shared.records.len(),
        "models": state.snapshot().len(),
        "version": env!("CARGO_PKG_VERSION"),
    }))
}

async fn list_models(State(state): State<AppState>) -> Json<Vec<ModelSummary>> {
    let snapshot = state.snapshot();
    Json(
        snapshot
            .entries()
            .map(|e| ModelSummary {
                id: e.id.clone(),
                kind: e.model.kind(),
                fingerprint: e.model.fingerprint(),
                input_width: e.model.encoder.width(),
                metrics: e.manifest.as_ref().and_then(|m| m.metrics),
            })
            .collect(),
    )
}

async fn predict(
    State(state): State<AppState>,
    body: Result<Json<PredictRequest>, JsonRejection>,
) -> Result<Json<PredictResponse>, ApiError> {
    let Json(req) = body?;
    let position = parse_position(&req.wk, &req.wr, &req.bk)?;
    let snapshot = state.snapshot();
    let entry = snapshot.get(&req.model_id).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_model",
            format!("no model with id `{}`", req.model_id),
        )
    })?;
    let (canonical, _) = canonicalize(&position);
    let prediction = entry
        .model
        .predict_position(&canonical)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "model_error", e.to_string()))?;
    let oracle_class = classify(&state.shared.tablebase, &canonical)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "oracle_error", e.to_string()))?;
    let scores = entry
        .model
        .class_order
        .iter()
        .zip(&prediction.scores)
        .map(|(&label, &score)| NamedScore { label, score })
        .collect();
    Ok(Json(PredictResponse {
        model_id: entry.id.clone(),
        kind: entry.model.kind(),
        canonical: Squares::from(&canonical),
        predicted_class: prediction.label,
        scores,
        oracle_class,
        agreement: prediction.label == oracle_class,
    }))
}

async fn dataset_stats(State(state): State<AppState>) -> Json<StatsResponse> {
    let records = &state.shared.records;
    Json(StatsResponse {
        total: records.len(),
        classes: statistics(records)
            .into_iter()
            .map(|s| StatRow {
                label: s.label,
                count: s.count,
                percent: (s.percent * 100.0).round() / 100.0,
            })
            .collect(),
    })
}

async fn dataset_samples(
    State(state): State<AppState>,
    query: Result<Query<PageQuery>, QueryRejection>,
) -> Result<Json<SamplesResponse>, ApiError> {
    let Query(page) = query?;
    let offset = page.offset.unwrap_or(0);
    let limit = page.limit.unwrap_or(DEFAULT_PAGE);
    if limit == 0 || limit > MAX_PAGE {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_pagination",
            format!("limit must lie in 1..={MAX_PAGE}"),
        ));
    }
    let records = &state.shared.records;
    let start = offset.min(records.len());
    let end = offset.saturating_add(limit).min(records.len());
    Ok(Json(SamplesResponse {
        total: records.len(),
        offset,
        limit,
        records: records[start..end]
            .iter()
            .enumerate()
            .map(|(i, r)| Sample {
                index: start + i,
                wk: r.wk,
                wr: r.wr,
                bk: r.bk,
                label: r.label,
                line: r.to_line(),
            })
            .collect(),
    }))
}

async fn oracle_classify(
    State(state): State<AppState>,
    query: Result<Query<SquaresQuery>, QueryRejection>,
) -> Result<Json<ClassifyResponse>, ApiError> {
    let Query(q) = query?;
    let field = |name: &'static str, v: Option<String>| {
        v.ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "missing_parameter",
                format!("query parameter `{name}` is required"),
            )
        })
    };
    let (wk, wr, bk) = (field("wk", q.wk)?, field("wr", q.wr)?, field("bk", q.bk)?);
    let position = parse_position(&wk, &wr, &bk)?;
    let (canonical, _) = canonicalize(&position);
    let tb = &state.shared.tablebase;
    let label = classify(tb, &position)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "oracle_error", e.to_string()))?;
    let moves = legal_black_moves(&position);
    let status = match status(&position) {
        Status::Checkmate => "checkmate",
        Status::Stalemate => "stalemate",
        Status::Ongoing => "ongoing",
    };
    Ok(Json(ClassifyResponse {
        position: Squares::from(&position),
        canonical: Squares::from(&canonical),
        label,
        value: label.value(),
        status: status.to_string(),
        black_moves: moves.destinations,
        can_capture_rook: moves.captures_rook,
    }))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

/// The API routes, plus the web client under `/ui` when `ui_dir` is given.
pub fn router(state: AppState, ui_dir: Option<&Path>) -> Router {
    let mut app = Router::new()
        .route("/api/health", get(health))
        .route("/api/models", get(list_models))
        .route("/api/predict", post(predict))
        .route("/api/dataset/stats", get(dataset_stats))
        .route("/api/dataset/samples", get(dataset_samples))
        .route("/api/oracle/classify", get(oracle_classify));
    if let Some(dir) = ui_dir {
        app = app.nest_service("/ui", ServeDir::new(dir));
    }
    app.fallback(not_found).with_state(state)
}

pub async fn serve(state: AppState, addr: SocketAddr, ui_dir: Option<&Path>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state, ui_dir)).await
}
