//! JSON-over-HTTP API, all routes under `/v1`.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, Method, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clinreason_core::case::{CaseRecord, EvidencePacket, GroundTruth, PacketKind};
use clinreason_core::difficulty::{profile_case, DifficultyProfile};
use clinreason_core::reporting::{aggregate_scores, parse_rater_sheet, render_report_text, CrcStep};
use clinreason_core::session::{
    current_prompts, flag_labs, Action, Annotation, DiagnosisAction, FilaFactor, MindMapAction, Outcome, Step,
};
use clinreason_core::{Session, SessionError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::{Store, StoreError};

/// Actor recorded for learner-initiated actions.
pub const ACTOR: &str = "learner";

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub api_token: Option<String>,
}

/// An error response: `{code, message, detail}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), detail: Value::Null }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "BadRequest", message)
    }
}

fn status_for(code: &str) -> StatusCode {
    match code {
        "NotFound" => StatusCode::NOT_FOUND,
        "PreconditionFailed" | "InvalidTransition" | "Exhausted" | "NoOpMove" | "NotRevealed" | "WrongKind"
        | "WrongStep" | "CaseInUse" => StatusCode::CONFLICT,
        "UnknownFactor" | "GeometryError" | "InvalidResponse" | "InvalidScore" | "BadRequest" | "CorpusError" => {
            StatusCode::UNPROCESSABLE_ENTITY
        }
        "OracleOnly" => StatusCode::SERVICE_UNAVAILABLE,
        "ModelUnavailable" | "ParseError" => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let code = e.code();
        Self { status: status_for(code), code, message: e.to_string(), detail: e.detail() }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        StoreError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "code": self.code, "message": self.message, "detail": self.detail });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs blocking store work off the async executor.
async fn blocking<T: Send + 'static>(
    state: &AppState,
    f: impl FnOnce(&Store) -> Result<T, ApiError> + Send + 'static,
) -> ApiResult<T> {
    let store = state.store.clone();
    tokio::task::spawn_blocking(move || f(&store))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn split_path(raw: Option<&String>) -> Vec<String> {
    raw.map(|p| p.split(['/', ',']).filter(|s| !s.is_empty()).map(str::to_owned).collect()).unwrap_or_default()
}

/// Learner-facing view of a case: no findings, packet bodies or ground truth.
#[derive(Serialize)]
struct CaseView<'a> {
    id: &'a str,
    taxonomy_path: &'a [String],
    description: &'a str,
    initial_narrative: &'a str,
    packets: Vec<PacketStub<'a>>,
    difficulty: DifficultyProfile,
}

#[derive(Serialize)]
struct PacketStub<'a> {
    id: &'a str,
    title: &'a str,
    kind: PacketKind,
    reveal_order: u32,
}

fn difficulty(case: &CaseRecord) -> ApiResult<DifficultyProfile> {
    profile_case(case).map_err(|e| ApiError::bad_request(e.to_string()))
}

/// A session snapshot plus the case material it has unlocked.
#[derive(Serialize)]
pub struct SessionView<'a> {
    #[serde(flatten)]
    session: &'a Session,
    description: &'a str,
    initial_narrative: &'a str,
    revealed_packets: Vec<&'a EvidencePacket>,
    remaining_packets: usize,
    /// Shown once the session reaches the reflection step.
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_truth: Option<&'a GroundTruth>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prognosis: Option<&'a str>,
}

fn session_view(session: &Session, case: &CaseRecord) -> Value {
    let reflecting = session.step == Step::PrognosisReflection;
    let view = SessionView {
        session,
        description: &case.description,
        initial_narrative: &case.initial_narrative,
        revealed_packets: session.revealed_packet_ids.iter().filter_map(|id| case.packet(id)).collect(),
        remaining_packets: case.packets.len() - session.revealed_packet_ids.len(),
        ground_truth: reflecting.then_some(&case.ground_truth),
        prognosis: reflecting.then_some(case.prognosis.as_str()),
    };
    serde_json::to_value(view).expect("views serialize")
}

fn case_of(store: &Store, session: &Session) -> ApiResult<CaseRecord> {
    store
        .corpus()
        .case(&session.case_id)
        .cloned()
        .ok_or_else(|| StoreError::NotFound(format!("case `{}`", session.case_id)).into())
}

fn commit(store: &Store, id: &str, action: Action) -> ApiResult<Json<Value>> {
    let (session, outcome) = store.commit(id, action, ACTOR)?;
    let case = case_of(store, &session)?;
    Ok(Json(json!({ "outcome": outcome, "session": session_view(&session, &case) })))
}

async fn taxonomy(State(s): State<AppState>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Json<Value>> {
    let path = split_path(q.get("path"));
    blocking(&s, move |store| {
        let listing = store.corpus().resolve_taxonomy(&path).map_err(StoreError::from)?;
        Ok(Json(serde_json::to_value(listing).expect("listing serializes")))
    })
    .await
}

async fn cases(State(s): State<AppState>, Query(q): Query<HashMap<String, String>>) -> ApiResult<Json<Value>> {
    let query = q.get("query").cloned().unwrap_or_default();
    let path = q.get("path").map(|p| split_path(Some(p)));
    blocking(&s, move |store| {
        let corpus = store.corpus();
        if let Some(p) = path.as_deref().filter(|p| !p.is_empty()) {
            corpus.resolve_taxonomy(p).map_err(StoreError::from)?;
        }
        let hits = corpus.search_cases(&query, path.as_deref());
        Ok(Json(serde_json::to_value(hits).expect("hits serialize")))
    })
    .await
}

async fn case(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(&s, move |store| {
        let corpus = store.corpus();
        let case = corpus.case(&id).ok_or_else(|| StoreError::NotFound(format!("case `{id}`")))?;
        let view = CaseView {
            id: &case.id,
            taxonomy_path: &case.taxonomy_path,
            description: &case.description,
            initial_narrative: &case.initial_narrative,
            packets: case
                .packets_in_reveal_order()
                .into_iter()
                .map(|p| PacketStub { id: &p.id, title: &p.title, kind: p.kind(), reveal_order: p.reveal_order })
                .collect(),
            difficulty: difficulty(case)?,
        };
        Ok(Json(serde_json::to_value(view).expect("views serialize")))
    })
    .await
}

async fn case_difficulty(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<DifficultyProfile>> {
    blocking(&s, move |store| {
        let corpus = store.corpus();
        let case = corpus.case(&id).ok_or_else(|| StoreError::NotFound(format!("case `{id}`")))?;
        Ok(Json(difficulty(case)?))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewSession {
    case_id: String,
}

async fn create_session(State(s): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let req: NewSession = parse_body(&body)?;
    blocking(&s, move |store| {
        let session = store.start_session(&req.case_id)?;
        let case = case_of(store, &session)?;
        Ok((StatusCode::CREATED, Json(session_view(&session, &case))))
    })
    .await
}

async fn get_session(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(&s, move |store| {
        let session = store.session(&id)?;
        let case = case_of(store, &session)?;
        Ok(Json(session_view(&session, &case)))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InquiryRequest {
    text: String,
    #[serde(default)]
    use_model: bool,
}

async fn inquiry(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: InquiryRequest = parse_body(&body)?;
    blocking(&s, move |store| {
        let result = store.inquire(&id, &req.text, req.use_model, ACTOR)?;
        let case = case_of(store, &result.session)?;
        let mut body = serde_json::to_value(&result).expect("results serialize");
        body["session"] = session_view(&result.session, &case);
        Ok(Json(body))
    })
    .await
}

async fn prompts(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(&s, move |store| {
        let session = store.session(&id)?;
        let case = case_of(store, &session)?;
        let prompts = current_prompts(&session, &case).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "MissingSlot", e.to_string()))?;
        Ok(Json(json!({ "step": session.step, "prompts": prompts })))
    })
    .await
}

async fn advance(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(&s, move |store| commit(store, &id, Action::Advance)).await
}

async fn evidence(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(&s, move |store| {
        let (session, outcome) = store.commit(&id, Action::RequestEvidence, ACTOR)?;
        let case = case_of(store, &session)?;
        let packet = match &outcome {
            Outcome::Revealed { packet_id } => case.packet(packet_id),
            _ => None,
        };
        Ok(Json(json!({ "outcome": outcome, "packet": packet, "session": session_view(&session, &case) })))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Wrapped<T> {
    action: T,
}

async fn diagnosis(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: Wrapped<DiagnosisAction> = parse_body(&body)?;
    blocking(&s, move |store| commit(store, &id, Action::Diagnosis(req.action))).await
}

/// Accepts factor spellings such as "Learning Issues" or "action_plans";
/// anything else is an `UnknownFactor` error rather than a schema error.
fn mindmap_action(mut body: Value) -> ApiResult<MindMapAction> {
    let action = body.get_mut("action").ok_or_else(|| ApiError::bad_request("missing `action`"))?;
    if let Some(factor) = action.get_mut("factor") {
        let raw = factor.as_str().map(str::to_owned).unwrap_or_else(|| factor.to_string());
        let parsed = FilaFactor::parse(&raw).ok_or(SessionError::UnknownFactor(raw))?;
        *factor = serde_json::to_value(parsed).expect("factors serialize");
    }
    serde_json::from_value(action.take()).map_err(|e| ApiError::bad_request(format!("malformed mind-map action: {e}")))
}

async fn mindmap(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let action = mindmap_action(parse_body(&body)?)?;
    blocking(&s, move |store| commit(store, &id, Action::Mindmap(action))).await
}

async fn annotate(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let annotation: Annotation = parse_body(&body)?;
    blocking(&s, move |store| commit(store, &id, Action::Annotate(annotation))).await
}

async fn lab_flags(State(s): State<AppState>, Path((id, packet_id)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    blocking(&s, move |store| {
        let session = store.session(&id)?;
        let case = case_of(store, &session)?;
        let packet = case.packet(&packet_id).ok_or_else(|| StoreError::NotFound(format!("packet `{packet_id}`")))?;
        if !session.is_revealed(&packet_id) {
            return Err(SessionError::NotRevealed(packet_id).into());
        }
        if packet.kind() != PacketKind::LabPanel {
            return Err(SessionError::WrongKind(packet_id).into());
        }
        Ok(Json(json!({ "packet_id": packet.id, "flags": flag_labs(packet) })))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportEdit {
    section: CrcStep,
    text: String,
}

/// Generates (or regenerates) the report; with a `{section, text}` body,
/// edits that section's learner content instead.
async fn post_report(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let action = if body.iter().all(u8::is_ascii_whitespace) {
        Action::GenerateReport
    } else {
        let edit: ReportEdit = parse_body(&body)?;
        Action::EditReport { section: edit.section, text: edit.text }
    };
    blocking(&s, move |store| commit(store, &id, action)).await
}

async fn get_report(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(&s, move |store| {
        let session = store.session(&id)?;
        let report = session.report.as_ref().ok_or_else(|| StoreError::NotFound(format!("report for session `{id}`")))?;
        Ok(Json(json!({ "report": report, "text": render_report_text(report) })))
    })
    .await
}

async fn post_scores(State(s): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("body is not UTF-8"))?.to_owned();
    blocking(&s, move |store| {
        let sheet = parse_rater_sheet(&text).map_err(StoreError::from)?;
        let (session, outcome) = store.commit(&id, Action::SubmitScores(sheet), ACTOR)?;
        let aggregate = aggregate_scores(&session.rater_sheets).map_err(StoreError::from)?;
        Ok(Json(json!({ "outcome": outcome, "aggregate": aggregate })))
    })
    .await
}

async fn get_aggregate(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(&s, move |store| {
        let session = store.session(&id)?;
        let aggregate = aggregate_scores(&session.rater_sheets).map_err(StoreError::from)?;
        Ok(Json(serde_json::to_value(aggregate).expect("aggregates serialize")))
    })
    .await
}

async fn export(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    blocking(&s, move |store| {
        let bytes = store.export(&id)?;
        let headers = [
            (header::CONTENT_TYPE, "application/gzip".to_owned()),
            (header::CONTENT_DISPOSITION, format!("attachment; filename=\"{id}.tar.gz\"")),
        ];
        Ok((headers, bytes).into_response())
    })
    .await
}

async fn require_token(State(s): State<AppState>, headers: HeaderMap, req: Request, next: Next) -> Response {
    let mutating = !matches!(*req.method(), Method::GET | Method::HEAD | Method::OPTIONS);
    if let (true, Some(token)) = (mutating, s.api_token.as_deref()) {
        let presented = headers.get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "Unauthorized", "a valid bearer token is required").into_response();
        }
    }
    next.run(req).await
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such route")
}

pub fn router(state: AppState) -> Router {
    let v1 = Router::new()
        .route("/taxonomy", get(taxonomy))
        .route("/cases", get(cases))
        .route("/cases/{id}", get(case))
        .route("/cases/{id}/difficulty", get(case_difficulty))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/inquiry", post(inquiry))
        .route("/sessions/{id}/prompts", get(prompts))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/evidence", post(evidence))
        .route("/sessions/{id}/diagnosis", post(diagnosis))
        .route("/sessions/{id}/mindmap", post(mindmap))
        .route("/sessions/{id}/annotations", post(annotate))
        .route("/sessions/{id}/labs/{packet_id}/flags", get(lab_flags))
        .route("/sessions/{id}/report", post(post_report).get(get_report))
        .route("/sessions/{id}/export", get(export))
        .route("/reports/{id}/scores", post(post_scores))
        .route("/reports/{id}/aggregate", get(get_aggregate));
    Router::new()
        .nest("/v1", v1)
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}
