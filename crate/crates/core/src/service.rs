//! Stateless JSON-over-HTTP API.
//!
//! Every request carries its model, either as the JSON mirror (`model`) or
//! as `.mag` text (`text`). Nothing is stored between requests.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};

use crate::data::InMemoryResolver;
use crate::diagnostics::{self as codes, lookup_code, Diagnostic};
use crate::dsl::{parse_model, parse_model_syntax};
use crate::graph::{enumerate_feedback_loops, DEFAULT_MAX_LOOPS, DEFAULT_MAX_LOOP_LEN};
use crate::model::Model;
use crate::reference::EXAMPLES;
use crate::sim::{
    all_scenarios, compare_runs, resolve_scenario, run, run_scenarios, Indicator, Scenario,
    SimError,
};
use crate::validate::validate_model;

/// Largest accepted `grid points x series` product per request.
pub const MAX_CELLS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub http_status: u16,
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        let http_status = lookup_code(code).map_or(422, |c| c.http_status);
        ApiError {
            http_status,
            code: code.to_string(),
            message: message.into(),
            diagnostics: Vec::new(),
        }
    }

    /// Envelope for a list of diagnostics, named after the first error.
    pub fn from_diagnostics(diagnostics: Vec<Diagnostic>) -> Self {
        let first = diagnostics.iter().find(|d| d.is_error()).cloned();
        let (code, message) = first.map_or(
            (
                codes::E_INVALID_MODEL.to_string(),
                "model is invalid".into(),
            ),
            |d| (d.code, d.message),
        );
        ApiError {
            http_status: 422,
            code,
            message,
            diagnostics,
        }
    }

    fn from_sim(e: SimError) -> Self {
        let mut err = ApiError::from_diagnostics(e.diagnostics());
        if let SimError::InvalidModel(_) = e {
            err.code = codes::E_INVALID_MODEL.into();
            err.message = e.to_string();
        }
        err
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status =
            StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn ok<T: Serialize>(body: T) -> ApiResult {
    Ok(Json(body).into_response())
}

/// Examples offered by `/api/examples`.
#[derive(Debug, Clone, Serialize)]
pub struct Example {
    pub id: String,
    pub title: String,
    pub text: String,
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default)]
pub struct AppState {
    pub examples: Vec<Example>,
}

impl AppState {
    /// The shipped examples only.
    pub fn builtin() -> Self {
        let examples = EXAMPLES
            .iter()
            .map(|e| Example {
                id: e.id.into(),
                title: e.title.into(),
                text: e.text.into(),
                files: e
                    .files
                    .iter()
                    .map(|(p, t)| (p.to_string(), t.to_string()))
                    .collect(),
            })
            .collect();
        AppState { examples }
    }

    /// Shipped examples plus every `*.mag` file in `dir`, whose data files
    /// are read relative to `dir`. Later entries replace earlier ones by id.
    pub fn with_model_dir(dir: &Path) -> std::io::Result<Self> {
        let mut state = AppState::builtin();
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "mag"))
            .collect();
        paths.sort();
        for path in paths {
            let text = std::fs::read_to_string(&path)?;
            let (model, _, _) = parse_model_syntax(&text);
            let id = path
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .to_string();
            let mut files = BTreeMap::new();
            let title = model.as_ref().map_or(id.clone(), |m| {
                if m.name.is_empty() {
                    m.id.clone()
                } else {
                    m.name.clone()
                }
            });
            if let Some(m) = &model {
                for b in m.data_bindings.values() {
                    if let crate::data::DataSource::File { path: rel, .. } = &b.source {
                        if let Ok(t) = std::fs::read_to_string(dir.join(rel)) {
                            files.insert(rel.clone(), t);
                        }
                    }
                }
            }
            state.examples.retain(|e| e.id != id);
            state.examples.push(Example {
                id,
                title,
                text,
                files,
            });
        }
        Ok(state)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/parse", post(parse))
        .route("/api/validate", post(validate))
        .route("/api/run", post(run_handler))
        .route("/api/loops", post(loops))
        .route("/api/compare", post(compare))
        .route("/api/examples", get(list_examples))
        .route("/api/examples/{id}", get(get_example))
        .with_state(Arc::new(state))
}

/// CORS for the studio. `None` allows any origin.
pub fn cors(origin: Option<&str>) -> CorsLayer {
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    match origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        Some(o) => layer.allow_origin(o),
        None => layer.allow_origin(Any),
    }
}

pub async fn serve(
    addr: SocketAddr,
    state: AppState,
    cors_origin: Option<String>,
) -> std::io::Result<()> {
    let app = router(state).layer(cors(cors_origin.as_deref()));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, app).await
}

fn body<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(bytes)
        .map_err(|e| ApiError::new(codes::E_BAD_JSON, format!("invalid request body: {e}")))
}

/// A model given as JSON or as `.mag` text.
#[derive(Debug, Default, Deserialize)]
struct ModelInput {
    #[serde(default)]
    model: Option<Model>,
    #[serde(default)]
    text: Option<String>,
}

impl ModelInput {
    /// The model, parsed from text when necessary. With `check`, text must
    /// also validate; JSON models are validated by the caller as needed.
    fn resolve(self, check: bool) -> Result<Model, ApiError> {
        match (self.model, self.text) {
            (Some(m), _) => Ok(m),
            (None, Some(text)) => {
                if check {
                    let r = parse_model(&text);
                    r.model
                        .ok_or_else(|| ApiError::from_diagnostics(r.diagnostics))
                } else {
                    let (m, diags, _) = parse_model_syntax(&text);
                    m.ok_or_else(|| ApiError::from_diagnostics(diags))
                }
            }
            (None, None) => Err(ApiError::new(
                codes::E_BAD_JSON,
                "request needs `model` or `text`",
            )),
        }
    }
}

#[derive(Deserialize)]
struct ParseRequest {
    text: String,
}

async fn parse(bytes: Bytes) -> ApiResult {
    let req: ParseRequest = body(&bytes)?;
    let r = parse_model(&req.text);
    if r.model.is_none() {
        return Err(ApiError::from_diagnostics(r.diagnostics));
    }
    ok(r)
}

async fn validate(bytes: Bytes) -> ApiResult {
    let req: ModelInput = body(&bytes)?;
    let diagnostics = match req.text {
        Some(text) if req.model.is_none() => parse_model(&text).diagnostics,
        _ => validate_model(
            &ModelInput {
                model: req.model,
                text: None,
            }
            .resolve(false)?,
        ),
    };
    ok(json!({ "diagnostics": diagnostics }))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ScenarioRef {
    Name(String),
    Inline(Scenario),
}

impl ScenarioRef {
    fn resolve(self, model: &Model) -> Result<Scenario, ApiError> {
        match self {
            ScenarioRef::Inline(s) => Ok(s),
            ScenarioRef::Name(n) => {
                resolve_scenario(model, &n).map_err(|d| ApiError::from_diagnostics(vec![d]))
            }
        }
    }
}

#[derive(Deserialize)]
struct RunRequest {
    #[serde(flatten)]
    input: ModelInput,
    #[serde(default)]
    scenario: Option<ScenarioRef>,
    #[serde(default)]
    selections: Option<Vec<String>>,
    #[serde(default)]
    files: BTreeMap<String, String>,
}

fn checked_model(input: ModelInput) -> Result<Model, ApiError> {
    let model = input.resolve(true)?;
    let diags = validate_model(&model);
    if codes::has_errors(&diags) {
        return Err(ApiError::from_diagnostics(diags));
    }
    Ok(model)
}

fn check_size(model: &Model, series: usize, runs: usize) -> Result<(), ApiError> {
    let points = model.time_spec.steps().map_or(0, |n| n + 1);
    let cells = points.saturating_mul(series).saturating_mul(runs);
    if cells > MAX_CELLS {
        return Err(ApiError::new(
            codes::E_TOO_LARGE,
            format!("{points} grid points x {series} series x {runs} run(s) exceeds the limit of {MAX_CELLS}"),
        ));
    }
    Ok(())
}

fn series_count(model: &Model) -> usize {
    model.variables.len() + model.stocks.len()
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(codes::E_INTERNAL, format!("worker failed: {e}")))?
}

async fn run_handler(bytes: Bytes) -> ApiResult {
    let req: RunRequest = body(&bytes)?;
    let model = checked_model(req.input)?;
    let scenario = req
        .scenario
        .unwrap_or(ScenarioRef::Name(Scenario::BASELINE.into()))
        .resolve(&model)?;
    if let Some(sel) = &req.selections {
        for id in sel {
            if model.variable(id).is_none() && model.stock(id).is_none() {
                return Err(ApiError::new(
                    codes::E_UNKNOWN_SERIES,
                    format!("model has no variable or stock `{id}`"),
                ));
            }
        }
    }
    check_size(
        &model,
        req.selections
            .as_ref()
            .map_or(series_count(&model), Vec::len),
        1,
    )?;
    let files = req.files;
    let selections = req.selections;
    let result = blocking(move || {
        let r =
            run(&model, &scenario, &InMemoryResolver::new(files)).map_err(ApiError::from_sim)?;
        match selections {
            Some(sel) => r
                .select(&sel)
                .map_err(|d| ApiError::from_diagnostics(vec![d])),
            None => Ok(r),
        }
    })
    .await?;
    ok(json!({ "run_result": result }))
}

#[derive(Deserialize)]
struct LoopsRequest {
    #[serde(flatten)]
    input: ModelInput,
    #[serde(default)]
    max_len: Option<usize>,
    #[serde(default)]
    max_count: Option<usize>,
}

async fn loops(bytes: Bytes) -> ApiResult {
    let req: LoopsRequest = body(&bytes)?;
    let max_len = req.max_len.unwrap_or(DEFAULT_MAX_LOOP_LEN);
    let max_count = req.max_count.unwrap_or(DEFAULT_MAX_LOOPS);
    if max_len < 2 || max_count < 1 {
        return Err(ApiError::new(
            codes::E_BAD_JSON,
            "max_len must be at least 2 and max_count at least 1",
        ));
    }
    let model = req.input.resolve(false)?;
    ok(enumerate_feedback_loops(&model, max_len, max_count))
}

#[derive(Deserialize)]
struct CompareRequest {
    #[serde(flatten)]
    input: ModelInput,
    baseline: String,
    #[serde(default)]
    scenarios: Option<Vec<ScenarioRef>>,
    #[serde(default)]
    indicators: Option<Vec<Indicator>>,
    #[serde(default)]
    files: BTreeMap<String, String>,
}

async fn compare(bytes: Bytes) -> ApiResult {
    let req: CompareRequest = body(&bytes)?;
    let model = checked_model(req.input)?;
    let scenarios: Vec<Scenario> = match req.scenarios {
        Some(list) => list
            .into_iter()
            .map(|s| s.resolve(&model))
            .collect::<Result<_, _>>()?,
        None => all_scenarios(&model),
    };
    let indicators = req.indicators.unwrap_or_else(|| model.indicators.clone());
    check_size(&model, series_count(&model), scenarios.len())?;
    let baseline = req.baseline;
    let files = req.files;
    let table = blocking(move || {
        if !scenarios.iter().any(|s| s.name == baseline) {
            return Err(ApiError::new(
                codes::E_NO_BASELINE,
                format!("baseline `{baseline}` is not among the scenarios"),
            ));
        }
        let runs = run_scenarios(&model, &scenarios, &InMemoryResolver::new(files))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()
            .map_err(ApiError::from_sim)?;
        compare_runs(&runs, &baseline, &indicators)
            .map_err(|e| ApiError::from_diagnostics(vec![e.to_diagnostic()]))
    })
    .await?;
    ok(json!({ "comparison_table": table }))
}

#[derive(Serialize)]
struct ExampleSummary<'a> {
    id: &'a str,
    title: &'a str,
}

async fn list_examples(State(state): State<Arc<AppState>>) -> ApiResult {
    let list: Vec<ExampleSummary> = state
        .examples
        .iter()
        .map(|e| ExampleSummary {
            id: &e.id,
            title: &e.title,
        })
        .collect();
    ok(json!({ "examples": list }))
}

async fn get_example(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult {
    match state.examples.iter().find(|e| e.id == id) {
        Some(e) => ok(e),
        None => Err(ApiError::new(
            codes::E_NOT_FOUND,
            format!("no example `{id}`"),
        )),
    }
}
