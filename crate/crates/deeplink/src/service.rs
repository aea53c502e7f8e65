//! HTTP service. Each analysis session owns one model and the artifacts
//! derived from it; steps must run in order (analyze, crawl, select,
//! manifest, replay) and out-of-order calls get a 409.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use deeplink_core::{
    tree_hash, AppModel, CrawlOptions, EntryScript, FragmentTransitionGraph, LinkError, ReleaseManifest, ReplayTrace,
    Selection, SimError, SimEvent, SimSession, StructureHash, ViewNode,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::formats::{self, export_manifest, ftg_dot, model_digest, navgraph_dot, to_json, FormatError};
use crate::pipeline::{self, Analysis, ErrorBody, PipelineError};
use crate::report::{ActivityShortcuts, AnalysisReport, NavGraphView};

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody::new(code, message) }
    }

    fn step_order(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, "StepOrder", message)
    }

    fn not_found(code: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, code, message)
    }

    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let status = match &e {
            PipelineError::Link(LinkError::UnknownActivity(_)) => StatusCode::NOT_FOUND,
            PipelineError::Link(LinkError::NotCrawled { .. }) => StatusCode::CONFLICT,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError { status, body: ErrorBody::from(&e) }
    }
}

impl From<FormatError> for ApiError {
    fn from(e: FormatError) -> Self {
        PipelineError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        text_response(self.status, "application/json", to_json(&self.body))
    }
}

type ApiResult = Result<Response, ApiError>;

fn text_response(status: StatusCode, content_type: &'static str, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, HeaderValue::from_static(content_type))], body).into_response()
}

fn json_ok<T: Serialize + ?Sized>(value: &T) -> Response {
    text_response(StatusCode::OK, "application/json", to_json(value))
}

#[derive(Debug)]
pub struct Session {
    pub model: AppModel,
    pub analysis: Option<Analysis>,
    pub ftgs: BTreeMap<String, FragmentTransitionGraph>,
    pub selection: Option<Selection>,
    pub manifest: Option<ReleaseManifest>,
    pub traces: Vec<ReplayTrace>,
}

impl Session {
    pub fn new(model: AppModel) -> Self {
        Session { model, analysis: None, ftgs: BTreeMap::new(), selection: None, manifest: None, traces: Vec::new() }
    }

    fn analysis(&self) -> Result<&Analysis, ApiError> {
        self.analysis.as_ref().ok_or_else(|| ApiError::step_order("run analyze first"))
    }

    fn check_activity(&self, activity: &str) -> Result<(), ApiError> {
        match self.model.activity(activity) {
            Some(_) => Ok(()),
            None => Err(ApiError::not_found("UnknownActivity", format!("unknown activity {activity:?}"))),
        }
    }
}

#[derive(Debug, Default)]
pub struct AppState {
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
    corpus_dir: Option<PathBuf>,
}

impl AppState {
    pub fn new(corpus_dir: Option<PathBuf>) -> Self {
        AppState { sessions: Mutex::new(HashMap::new()), corpus_dir }
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        let sessions = self.sessions.lock().unwrap_or_else(|e| e.into_inner());
        sessions
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("UnknownSession", format!("no session {id:?}")))
    }
}

fn lock(session: &Mutex<Session>) -> MutexGuard<'_, Session> {
    session.lock().unwrap_or_else(|e| e.into_inner())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(|| async { json_ok(&json!({"status": "ok"})) }))
        .route("/corpus", get(list_corpus))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_status).delete(delete_session))
        .route("/sessions/{id}/model", get(get_model))
        .route("/sessions/{id}/analyze", post(analyze))
        .route("/sessions/{id}/navgraph", get(navgraph))
        .route("/sessions/{id}/activities/{a}/shortcuts", get(shortcuts))
        .route("/sessions/{id}/activities/{a}/entry", get(entry))
        .route("/sessions/{id}/activities/{a}/crawl", post(crawl))
        .route("/sessions/{id}/activities/{a}/ftg", get(ftg).put(put_ftg))
        .route("/sessions/{id}/selection", get(get_selection).put(put_selection))
        .route("/sessions/{id}/manifest", get(get_manifest).post(build_manifest).put(import_manifest))
        .route("/sessions/{id}/replay", post(replay))
        .route("/sessions/{id}/traces", get(traces))
        .route("/sessions/{id}/trace/{n}", get(trace))
        .route("/sessions/{id}/simulate", post(simulate))
        .route("/sessions/{id}/snapshot", get(snapshot))
        .with_state(state)
}

pub async fn serve(port: u16, corpus_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(AppState::new(corpus_dir)))).await
}

type Params = Query<HashMap<String, String>>;

fn flag(params: &HashMap<String, String>, name: &str) -> Result<bool, ApiError> {
    match params.get(name).map(String::as_str) {
        None | Some("false") => Ok(false),
        Some("" | "true") => Ok(true),
        Some(other) => Err(ApiError::bad_request("BadQuery", format!("{name}={other:?} is not a boolean"))),
    }
}

fn number(params: &HashMap<String, String>, name: &str) -> Result<Option<usize>, ApiError> {
    params
        .get(name)
        .map(|v| v.parse().map_err(|_| ApiError::bad_request("BadQuery", format!("{name}={v:?} is not a number"))))
        .transpose()
}

fn wants_dot(params: &HashMap<String, String>) -> Result<bool, ApiError> {
    match params.get("format").map(String::as_str) {
        None | Some("json") => Ok(false),
        Some("dot") => Ok(true),
        Some(other) => Err(ApiError::bad_request("BadQuery", format!("unknown format {other:?}"))),
    }
}

fn body_json<T: for<'de> Deserialize<'de>>(body: &Bytes, what: &str) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("FormatError", format!("malformed {what}: {e}")))
}

fn corpus_path(state: &AppState, name: &str) -> Result<PathBuf, ApiError> {
    let dir = state
        .corpus_dir
        .as_ref()
        .ok_or_else(|| ApiError::not_found("NoCorpus", "the service was started without --corpus-dir"))?;
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(ApiError::bad_request("BadCorpusName", format!("invalid corpus name {name:?}")));
    }
    let path = dir.join(format!("{name}.app.json"));
    if !path.is_file() {
        return Err(ApiError::not_found("UnknownCorpusModel", format!("no corpus model {name:?}")));
    }
    Ok(path)
}

async fn list_corpus(State(state): State<Arc<AppState>>) -> ApiResult {
    let Some(dir) = &state.corpus_dir else {
        return Ok(json_ok(&Vec::<String>::new()));
    };
    let entries = std::fs::read_dir(dir)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Io", e.to_string()))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".app.json")).map(String::from))
        .collect();
    names.sort();
    Ok(json_ok(&names))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Created<'a> {
    id: &'a str,
    package_name: &'a str,
    model_digest: String,
    activities: Vec<&'a str>,
}

/// Body: an app model. With `?corpus=<name>` the model is read from the
/// corpus directory instead and the body is ignored.
async fn create_session(State(state): State<Arc<AppState>>, Query(params): Params, body: Bytes) -> ApiResult {
    let model = match params.get("corpus") {
        Some(name) => formats::load_app_model(&corpus_path(&state, name)?)?,
        None => {
            let text = std::str::from_utf8(&body)
                .map_err(|_| ApiError::bad_request("FormatError", "request body is not UTF-8"))?;
            formats::parse_app_model(text)?
        }
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    let created = Created {
        id: &id,
        package_name: &model.package_name,
        model_digest: model_digest(&model).0,
        activities: model.activities.iter().map(|a| a.name.as_str()).collect(),
    };
    let response = text_response(StatusCode::CREATED, "application/json", to_json(&created));
    log::info!("session {id}: {}", model.package_name);
    state
        .sessions
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .insert(id, Arc::new(Mutex::new(Session::new(model))));
    Ok(response)
}

async fn session_status(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let session = state.session(&id)?;
    let s = lock(&session);
    Ok(json_ok(&json!({
        "id": id,
        "packageName": s.model.package_name,
        "analyzed": s.analysis.is_some(),
        "crawled": s.ftgs.keys().collect::<Vec<_>>(),
        "selection": s.selection.is_some(),
        "manifest": s.manifest.is_some(),
        "traces": s.traces.len(),
    })))
}

async fn delete_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    match state.sessions.lock().unwrap_or_else(|e| e.into_inner()).remove(&id) {
        Some(_) => Ok(StatusCode::NO_CONTENT.into_response()),
        None => Err(ApiError::not_found("UnknownSession", format!("no session {id:?}"))),
    }
}

async fn get_model(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let session = state.session(&id)?;
    let s = lock(&session);
    Ok(json_ok(&s.model))
}

/// Same document as the CLI's `analyze` report. `?maxLen=` bounds path
/// length.
async fn analyze(State(state): State<Arc<AppState>>, Path(id): Path<String>, Query(params): Params) -> ApiResult {
    let max_len = number(&params, "maxLen")?;
    let session = state.session(&id)?;
    let mut s = lock(&session);
    let analysis = pipeline::analyze(&s.model, max_len)?;
    let report = AnalysisReport::new(&s.model, &analysis);
    s.analysis = Some(analysis);
    s.manifest = None;
    Ok(json_ok(&report))
}

async fn navgraph(State(state): State<Arc<AppState>>, Path(id): Path<String>, Query(params): Params) -> ApiResult {
    let dot = wants_dot(&params)?;
    let session = state.session(&id)?;
    let s = lock(&session);
    let analysis = s.analysis()?;
    Ok(if dot {
        text_response(StatusCode::OK, "text/vnd.graphviz", navgraph_dot(&analysis.graph))
    } else {
        json_ok(&NavGraphView::new(&analysis.graph, analysis.max_len))
    })
}

async fn shortcuts(State(state): State<Arc<AppState>>, Path((id, activity)): Path<(String, String)>) -> ApiResult {
    let session = state.session(&id)?;
    let s = lock(&session);
    s.check_activity(&activity)?;
    let analysis = s.analysis()?;
    Ok(json_ok(&ActivityShortcuts::new(&analysis.shortcuts, &activity)))
}

/// The entry script a crawl uses when none is given.
async fn entry(State(state): State<Arc<AppState>>, Path((id, activity)): Path<(String, String)>) -> ApiResult {
    let session = state.session(&id)?;
    let s = lock(&session);
    s.check_activity(&activity)?;
    let analysis = s.analysis()?;
    Ok(json_ok(&pipeline::auto_entry(analysis, &activity)?))
}

fn crawl_options(params: &HashMap<String, String>) -> Result<CrawlOptions, ApiError> {
    let mut options = CrawlOptions::default();
    if let Some(budget) = number(params, "budget")? {
        options.step_budget = budget;
    }
    options.cross_edges = flag(params, "crossEdges")?;
    options.position_fallback = flag(params, "positionFallback")?;
    Ok(options)
}

/// Body: an entry script, or nothing for the automatic one. Query:
/// `budget`, `crossEdges`, `positionFallback`.
async fn crawl(
    State(state): State<Arc<AppState>>,
    Path((id, activity)): Path<(String, String)>,
    Query(params): Params,
    body: Bytes,
) -> ApiResult {
    let options = crawl_options(&params)?;
    let entry: Option<EntryScript> =
        if body.iter().all(u8::is_ascii_whitespace) { None } else { Some(body_json(&body, "entry script")?) };
    let session = state.session(&id)?;
    let mut s = lock(&session);
    s.check_activity(&activity)?;
    let ftg = pipeline::crawl(&s.model, s.analysis()?, &activity, entry.as_ref(), &options)?;
    let response = json_ok(&ftg);
    s.ftgs.insert(activity, ftg);
    s.manifest = None;
    Ok(response)
}

async fn ftg(
    State(state): State<Arc<AppState>>,
    Path((id, activity)): Path<(String, String)>,
    Query(params): Params,
) -> ApiResult {
    let dot = wants_dot(&params)?;
    let session = state.session(&id)?;
    let s = lock(&session);
    s.check_activity(&activity)?;
    let ftg = s.ftgs.get(&activity).ok_or_else(|| ApiError::step_order(format!("{activity} has not been crawled")))?;
    Ok(if dot { text_response(StatusCode::OK, "text/vnd.graphviz", ftg_dot(ftg)) } else { json_ok(ftg) })
}

/// Replaces the crawled graph, e.g. after the developer added or renamed
/// fragments by hand.
async fn put_ftg(State(state): State<Arc<AppState>>, Path((id, activity)): Path<(String, String)>, body: Bytes) -> ApiResult {
    let graph: FragmentTransitionGraph = body_json(&body, "fragment graph")?;
    let session = state.session(&id)?;
    let mut s = lock(&session);
    s.check_activity(&activity)?;
    s.analysis()?;
    if graph.activity != activity {
        return Err(ApiError::bad_request("FormatError", format!("graph is for {:?}", graph.activity)));
    }
    let response = json_ok(&graph);
    s.ftgs.insert(activity, graph);
    s.manifest = None;
    Ok(response)
}

async fn get_selection(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let session = state.session(&id)?;
    let s = lock(&session);
    let selection = s.selection.as_ref().ok_or_else(|| ApiError::step_order("no selection yet"))?;
    Ok(json_ok(selection))
}

async fn put_selection(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let selection: Selection = body_json(&body, "selection")?;
    let session = state.session(&id)?;
    let mut s = lock(&session);
    s.analysis()?;
    for target in &selection.targets {
        s.check_activity(&target.activity)?;
    }
    let response = json_ok(&selection);
    s.selection = Some(selection);
    s.manifest = None;
    Ok(response)
}

/// Builds the manifest for the current selection. `?autoCrawl` crawls
/// activities whose fragments are selected but not crawled yet.
async fn build_manifest(State(state): State<Arc<AppState>>, Path(id): Path<String>, Query(params): Params) -> ApiResult {
    let auto_crawl = flag(&params, "autoCrawl")?;
    let options = crawl_options(&params)?;
    let session = state.session(&id)?;
    let mut guard = lock(&session);
    let s = &mut *guard;
    let analysis = s.analysis.as_ref().ok_or_else(|| ApiError::step_order("run analyze first"))?;
    let selection = s.selection.as_ref().ok_or_else(|| ApiError::step_order("put a selection first"))?;
    if auto_crawl {
        pipeline::crawl_selected(&s.model, analysis, &mut s.ftgs, selection, &options)?;
    }
    let manifest = pipeline::link(&s.model, analysis, &s.ftgs, selection)?;
    let response = text_response(StatusCode::OK, "application/json", export_manifest(&manifest));
    s.manifest = Some(manifest);
    Ok(response)
}

async fn get_manifest(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let session = state.session(&id)?;
    let s = lock(&session);
    let manifest = s.manifest.as_ref().ok_or_else(|| ApiError::step_order("no manifest yet"))?;
    Ok(text_response(StatusCode::OK, "application/json", export_manifest(manifest)))
}

/// Installs an existing manifest, checked against the session's model.
async fn import_manifest(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("FormatError", "request body is not UTF-8"))?;
    let session = state.session(&id)?;
    let mut s = lock(&session);
    let manifest = formats::import_manifest(text, Some(&s.model))?;
    let response = text_response(StatusCode::OK, "application/json", export_manifest(&manifest));
    s.manifest = Some(manifest);
    Ok(response)
}

#[derive(Deserialize)]
struct ReplayRequest {
    uri: String,
}

/// Body: `{"uri": ...}`. Responds with the trace; its index is in the
/// `Location` header.
async fn replay(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let request: ReplayRequest = body_json(&body, "replay request")?;
    let session = state.session(&id)?;
    let mut s = lock(&session);
    let manifest = s.manifest.as_ref().ok_or_else(|| ApiError::step_order("build or import a manifest first"))?;
    let trace = pipeline::replay(&s.model, manifest, &request.uri)?;
    let mut response = json_ok(&trace);
    let location = format!("/sessions/{id}/trace/{}", s.traces.len());
    response
        .headers_mut()
        .insert(header::LOCATION, HeaderValue::from_str(&location).expect("ascii location"));
    s.traces.push(trace);
    Ok(response)
}

async fn traces(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let session = state.session(&id)?;
    let s = lock(&session);
    Ok(text_response(StatusCode::OK, "application/x-ndjson", formats::traces_jsonl(&s.traces)))
}

async fn trace(State(state): State<Arc<AppState>>, Path((id, n)): Path<(String, String)>) -> ApiResult {
    let session = state.session(&id)?;
    let s = lock(&session);
    let trace = n
        .parse::<usize>()
        .ok()
        .and_then(|n| s.traces.get(n))
        .ok_or_else(|| ApiError::not_found("UnknownTrace", format!("no trace {n:?}")))?;
    Ok(json_ok(trace))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SimulationView {
    back_stack: Vec<String>,
    activity: Option<String>,
    screen: Option<String>,
    view_tree: Option<ViewNode>,
    tree_hash: Option<StructureHash>,
    events: Vec<SimEvent>,
    error: Option<SimError>,
}

/// Runs an entry script from a fresh launch and shows where it ends up.
/// Used to compose entry scripts step by step.
async fn simulate(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let script: EntryScript = body_json(&body, "entry script")?;
    let session = state.session(&id)?;
    let s = lock(&session);
    let mut sim = SimSession::launch(&s.model);
    let error = script.run(&mut sim).err();
    let tree = sim.current_view_tree().ok();
    let view = SimulationView {
        back_stack: sim.back_stack().iter().map(|i| i.activity.clone()).collect(),
        activity: sim.current_activity().ok().map(String::from),
        screen: sim.current_screen().ok().map(String::from),
        tree_hash: tree.as_ref().map(tree_hash),
        view_tree: tree,
        events: sim.events().to_vec(),
        error,
    };
    Ok(json_ok(&view))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Snapshot<'a> {
    model: &'a AppModel,
    report: Option<AnalysisReport>,
    ftgs: &'a BTreeMap<String, FragmentTransitionGraph>,
    selection: Option<&'a Selection>,
    manifest: Option<&'a ReleaseManifest>,
    traces: &'a [ReplayTrace],
}

/// Everything the session holds, as one JSON document.
async fn snapshot(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let session = state.session(&id)?;
    let s = lock(&session);
    Ok(json_ok(&Snapshot {
        model: &s.model,
        report: s.analysis.as_ref().map(|a| AnalysisReport::new(&s.model, a)),
        ftgs: &s.ftgs,
        selection: s.selection.as_ref(),
        manifest: s.manifest.as_ref(),
        traces: &s.traces,
    }))
}
