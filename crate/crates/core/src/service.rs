//! JSON-over-HTTP study service.
//!
//! Routes:
//!
//! | method | path                                  | effect                                  |
//! |--------|---------------------------------------|-----------------------------------------|
//! | POST   | `/api/sessions`                       | create a session from demographics      |
//! | POST   | `/api/sessions/{id}/interests`        | submit questionnaire selections         |
//! | GET    | `/api/sessions/{id}/recommendations`  | top-3 recommendations (cached)          |
//! | POST   | `/api/sessions/{id}/responses`        | submit judgments and survey answers     |
//! | GET    | `/api/export`                         | all responses as JSONL (admin token)    |
//! | GET    | `/api/questionnaire`                  | the interest questionnaire              |
//!
//! Sessions move strictly forward through `created`, `interests_submitted`,
//! `recommended` and `completed`. Every transition appends a session
//! snapshot to `sessions.jsonl`; completed surveys are appended to
//! `responses.jsonl`. Both files live in the data directory and are never
//! rewritten. On start-up the latest snapshot of each session is replayed.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{Mutex, RwLock};

use crate::artifact::{load_variant, variant_file_name};
use crate::dataset::Gender;
use crate::error::{Error, Result};
use crate::interests::{selections_to_likes, QuestionnaireSpec};
use crate::ncf::rng_for;
use crate::pipeline::{Recommendation, SystemVariant, VariantKind};
use crate::study::{
    ClassStanding, Likert, Openness, RecommendationJudgment, SurveyResponse, JUDGMENTS_PER_RESPONSE,
};

pub const SESSIONS_FILE: &str = "sessions.jsonl";
pub const RESPONSES_FILE: &str = "responses.jsonl";
pub const ADMIN_TOKEN_ENV: &str = "CAREERREC_ADMIN_TOKEN";
pub const ADMIN_TOKEN_HEADER: &str = "x-admin-token";
pub const RECOMMENDATIONS_PER_SESSION: usize = JUDGMENTS_PER_RESPONSE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Created,
    InterestsSubmitted,
    Recommended,
    Completed,
}

impl SessionState {
    pub fn as_str(self) -> &'static str {
        match self {
            SessionState::Created => "created",
            SessionState::InterestsSubmitted => "interests_submitted",
            SessionState::Recommended => "recommended",
            SessionState::Completed => "completed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub gender: Gender,
    pub class_standing: ClassStanding,
    pub openness: Openness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub demographics: Demographics,
    pub variant_kind: VariantKind,
    pub state: SessionState,
    pub selections: Option<Vec<String>>,
    pub recommendations: Option<Vec<Recommendation>>,
}

/// Survey answers posted after the recommendations were shown. Judgments
/// must follow the served recommendations in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponsePayload {
    pub q_stereotype: Likert,
    pub q_disparity_personal: Likert,
    pub judgments: Vec<RecommendationJudgment>,
    pub q_use_again: Likert,
    pub q_recommend_to_others: Likert,
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// `None` disables the export endpoint.
    pub admin_token: Option<String>,
    pub assignment_seed: u64,
}

/// Append-only JSONL writer. Each record is written with a single
/// `write_all` while the file lock is held, so records never interleave.
struct AppendLog {
    path: PathBuf,
    file: File,
}

impl AppendLog {
    fn open(path: PathBuf) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok(AppendLog { path, file })
    }

    fn append<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| Error::io(&self.path, e))?;
        self.file.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub struct ServiceState {
    variants: BTreeMap<VariantKind, Arc<SystemVariant>>,
    questionnaire: QuestionnaireSpec,
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    n_sessions: Mutex<u64>,
    session_log: Mutex<AppendLog>,
    response_log: Mutex<AppendLog>,
    responses: Mutex<Vec<SurveyResponse>>,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: format!("{}: {e}", path.display()),
        })?);
    }
    Ok(out)
}

impl ServiceState {
    /// Build the service state, replaying any sessions and responses already
    /// present in the data directory.
    pub fn new(
        variants: Vec<SystemVariant>,
        questionnaire: QuestionnaireSpec,
        config: ServiceConfig,
    ) -> Result<Self> {
        let variants: BTreeMap<VariantKind, Arc<SystemVariant>> =
            variants.into_iter().map(|v| (v.kind(), Arc::new(v))).collect();
        for k in VariantKind::ALL {
            if !variants.contains_key(&k) {
                return Err(Error::invalid(format!("missing {k} variant")));
            }
        }
        std::fs::create_dir_all(&config.data_dir).map_err(|e| Error::io(&config.data_dir, e))?;
        let sessions_path = config.data_dir.join(SESSIONS_FILE);
        let responses_path = config.data_dir.join(RESPONSES_FILE);
        let mut sessions = HashMap::new();
        let mut order = 0u64;
        for s in read_jsonl::<Session>(&sessions_path)? {
            if s.state == SessionState::Created {
                order += 1;
            }
            sessions.insert(s.session_id.clone(), s);
        }
        let responses: Vec<SurveyResponse> = read_jsonl(&responses_path)?;
        log::info!(
            "replayed {} sessions and {} responses from {}",
            sessions.len(),
            responses.len(),
            config.data_dir.display()
        );
        Ok(ServiceState {
            variants,
            questionnaire,
            sessions: RwLock::new(
                sessions
                    .into_iter()
                    .map(|(k, v)| (k, Arc::new(Mutex::new(v))))
                    .collect(),
            ),
            n_sessions: Mutex::new(order),
            session_log: Mutex::new(AppendLog::open(sessions_path)?),
            response_log: Mutex::new(AppendLog::open(responses_path)?),
            responses: Mutex::new(responses),
            config,
        })
    }

    /// Load the three variant artifacts from `model_dir` and the questionnaire.
    pub fn load(model_dir: &Path, questionnaire: &Path, config: ServiceConfig) -> Result<Self> {
        let variants = VariantKind::ALL
            .into_iter()
            .map(|k| load_variant(model_dir.join(variant_file_name(k))))
            .collect::<Result<Vec<_>>>()?;
        ServiceState::new(variants, QuestionnaireSpec::load(questionnaire)?, config)
    }

    pub fn questionnaire(&self) -> &QuestionnaireSpec {
        &self.questionnaire
    }

    /// Completed responses in submission order.
    pub async fn responses(&self) -> Vec<SurveyResponse> {
        self.responses.lock().await.clone()
    }

    pub async fn session(&self, id: &str) -> Option<Session> {
        let s = self.sessions.read().await.get(id).cloned()?;
        let guard = s.lock().await;
        Some(guard.clone())
    }

    async fn session_handle(&self, id: &str) -> std::result::Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session `{id}`")))
    }

    async fn record(&self, s: &Session) -> std::result::Result<(), ApiError> {
        self.session_log.lock().await.append(s).map_err(ApiError::internal)
    }
}

/// Variant for the `index`-th session of a participant of gender `g`.
/// Nonbinary and undisclosed participants always get the debiased variant;
/// everyone else is assigned 50/50 between debiased and their own
/// gender-aware model.
pub fn assign_variant(seed: u64, index: u64, g: Gender) -> VariantKind {
    match VariantKind::aware_for(g) {
        Some(aware) if !rng_for(seed, index).random_bool(0.5) => aware,
        _ => VariantKind::GenderDebiased,
    }
}

fn new_session_id() -> String {
    let bits: u128 = rand::rng().random();
    format!("{bits:032x}")
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    fields: Vec<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            fields: Vec::new(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }

    fn state(s: SessionState, action: &str) -> Self {
        ApiError::new(
            StatusCode::CONFLICT,
            format!("cannot {action} in state {}", s.as_str()),
        )
    }

    fn internal(e: Error) -> Self {
        log::error!("{e}");
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.message });
        if !self.fields.is_empty() {
            body["fields"] = json!(self.fields);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn parse_body(body: &Bytes) -> ApiResult<Value> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("malformed JSON: {e}")))
}

fn parse_demographics(body: &Bytes) -> ApiResult<Demographics> {
    let v = parse_body(body)?;
    let mut bad = Vec::new();
    fn field<T: for<'de> Deserialize<'de>>(v: &Value, name: &str, bad: &mut Vec<String>) -> Option<T> {
        let parsed = v.get(name).and_then(|x| serde_json::from_value(x.clone()).ok());
        if parsed.is_none() {
            bad.push(name.to_string());
        }
        parsed
    }
    let gender = field::<Gender>(&v, "gender", &mut bad);
    let class_standing = field::<ClassStanding>(&v, "class_standing", &mut bad);
    let openness = field::<Openness>(&v, "openness", &mut bad);
    match (gender, class_standing, openness) {
        (Some(gender), Some(class_standing), Some(openness)) => Ok(Demographics {
            gender,
            class_standing,
            openness,
        }),
        _ => Err(ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            message: format!("invalid demographics: {}", bad.join(", ")),
            fields: bad,
        }),
    }
}

async fn create_session(State(st): State<Arc<ServiceState>>, body: Bytes) -> ApiResult<Response> {
    let demographics = parse_demographics(&body)?;
    let index = {
        let mut n = st.n_sessions.lock().await;
        *n += 1;
        *n - 1
    };
    let session = Session {
        session_id: new_session_id(),
        created_at: now(),
        variant_kind: assign_variant(st.config.assignment_seed, index, demographics.gender),
        demographics,
        state: SessionState::Created,
        selections: None,
        recommendations: None,
    };
    st.record(&session).await?;
    st.sessions
        .write()
        .await
        .insert(session.session_id.clone(), Arc::new(Mutex::new(session.clone())));
    Ok((StatusCode::CREATED, Json(session)).into_response())
}

#[derive(Deserialize)]
struct InterestsBody {
    selections: Vec<String>,
}

async fn submit_interests(
    State(st): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let handle = st.session_handle(&id).await?;
    let mut s = handle.lock().await;
    if s.state != SessionState::Created {
        return Err(ApiError::state(s.state, "submit interests"));
    }
    let b: InterestsBody = serde_json::from_value(parse_body(&body)?)
        .map_err(|e| ApiError::invalid(format!("invalid interests: {e}")))?;
    if b.selections.is_empty() {
        return Err(ApiError::invalid("at least one interest must be selected"));
    }
    let likes = selections_to_likes(&st.questionnaire, &b.selections).map_err(|e| ApiError::invalid(e.to_string()))?;
    let mut next = s.clone();
    next.selections = Some(likes);
    next.state = SessionState::InterestsSubmitted;
    st.record(&next).await?;
    *s = next;
    Ok(Json(json!({ "session_id": s.session_id, "state": s.state })))
}

async fn get_recommendations(
    State(st): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<Vec<Recommendation>>> {
    let handle = st.session_handle(&id).await?;
    let mut s = handle.lock().await;
    if s.state == SessionState::Created {
        return Err(ApiError::state(s.state, "get recommendations"));
    }
    if let Some(r) = &s.recommendations {
        return Ok(Json(r.clone()));
    }
    let variant = Arc::clone(&st.variants[&s.variant_kind]);
    let likes = s.selections.clone().unwrap_or_default();
    let recs = tokio::task::spawn_blocking(move || variant.recommend(&likes, RECOMMENDATIONS_PER_SESSION))
        .await
        .map_err(|e| ApiError::internal(Error::invalid(e.to_string())))?
        .map_err(ApiError::internal)?;
    let mut next = s.clone();
    next.recommendations = Some(recs.clone());
    next.state = SessionState::Recommended;
    st.record(&next).await?;
    *s = next;
    Ok(Json(recs))
}

async fn submit_response(
    State(st): State<Arc<ServiceState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let handle = st.session_handle(&id).await?;
    let mut s = handle.lock().await;
    if s.state != SessionState::Recommended {
        return Err(ApiError::state(s.state, "submit a response"));
    }
    let p: ResponsePayload = serde_json::from_value(parse_body(&body)?)
        .map_err(|e| ApiError::invalid(format!("invalid response: {e}")))?;
    let served: Vec<&str> = s
        .recommendations
        .iter()
        .flatten()
        .map(|r| r.concentration_id.as_str())
        .collect();
    let judged: Vec<&str> = p.judgments.iter().map(|j| j.concentration_id.as_str()).collect();
    if served != judged {
        return Err(ApiError::invalid(format!(
            "judged concentrations {judged:?} do not match served {served:?}"
        )));
    }
    let response = SurveyResponse {
        session_id: s.session_id.clone(),
        gender: s.demographics.gender,
        class_standing: s.demographics.class_standing,
        openness: s.demographics.openness,
        q_stereotype: p.q_stereotype,
        q_disparity_personal: p.q_disparity_personal,
        selections: s.selections.iter().flatten().cloned().collect(),
        judgments: p.judgments,
        q_use_again: p.q_use_again,
        q_recommend_to_others: p.q_recommend_to_others,
        variant_kind: s.variant_kind,
    };
    response.validate().map_err(|e| ApiError::invalid(e.to_string()))?;
    {
        let mut log = st.response_log.lock().await;
        log.append(&response).map_err(ApiError::internal)?;
        st.responses.lock().await.push(response);
    }
    let mut next = s.clone();
    next.state = SessionState::Completed;
    st.record(&next).await?;
    *s = next;
    Ok(Json(json!({ "session_id": s.session_id, "state": s.state })))
}

fn token_matches(headers: &HeaderMap, expected: &str) -> bool {
    let bearer = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    let custom = headers.get(ADMIN_TOKEN_HEADER).and_then(|v| v.to_str().ok());
    bearer.or(custom) == Some(expected)
}

async fn export(State(st): State<Arc<ServiceState>>, headers: HeaderMap) -> ApiResult<Response> {
    match &st.config.admin_token {
        Some(t) if token_matches(&headers, t) => {}
        _ => return Err(ApiError::new(StatusCode::FORBIDDEN, "admin token required")),
    }
    let path = st.config.data_dir.join(RESPONSES_FILE);
    // Hold the appender lock so the export never sees a partial record.
    let bytes = {
        let _guard = st.response_log.lock().await;
        std::fs::read(&path).map_err(|e| ApiError::internal(Error::io(&path, e)))?
    };
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}

async fn questionnaire(State(st): State<Arc<ServiceState>>) -> Json<QuestionnaireSpec> {
    Json(st.questionnaire.clone())
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/interests", post(submit_interests))
        .route("/api/sessions/{id}/recommendations", get(get_recommendations))
        .route("/api/sessions/{id}/responses", post(submit_response))
        .route("/api/export", get(export))
        .route("/api/questionnaire", get(questionnaire))
        .with_state(state)
}

/// Serve until interrupted with Ctrl-C.
pub async fn serve(state: Arc<ServiceState>, addr: SocketAddr) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(format!("bind {addr}"), e))?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io("serve", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonbinary_always_debiased() {
        for i in 0..200 {
            assert_eq!(assign_variant(3, i, Gender::Nonbinary), VariantKind::GenderDebiased);
            assert_eq!(assign_variant(3, i, Gender::Undisclosed), VariantKind::GenderDebiased);
        }
    }

    #[test]
    fn aware_assignment_matches_gender() {
        for i in 0..200 {
            let k = assign_variant(3, i, Gender::Female);
            assert!(matches!(k, VariantKind::GenderDebiased | VariantKind::GenderAwareFemale));
            let k = assign_variant(3, i, Gender::Male);
            assert!(matches!(k, VariantKind::GenderDebiased | VariantKind::GenderAwareMale));
        }
    }

    #[test]
    fn states_are_ordered() {
        assert!(SessionState::Created < SessionState::InterestsSubmitted);
        assert!(SessionState::InterestsSubmitted < SessionState::Recommended);
        assert!(SessionState::Recommended < SessionState::Completed);
    }
}
