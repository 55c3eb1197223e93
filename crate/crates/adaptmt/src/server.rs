//! HTTP/JSON translation server with a lazily loaded per-project registry.
//!
//! | method | path                       | body / result |
//! |--------|----------------------------|---------------|
//! | POST   | `/api/v1/translate`        | `{project_id, segments:[{id, src}]}` → `{segments:[{id, tgt, hypothesis_id, model_updates_seen}]}` |
//! | POST   | `/api/v1/update`           | `{project_id, segment_id, src, post_edit}` → `{accepted, pre_loss, post_loss, updates_applied}` |
//! | GET    | `/api/v1/status/{project}` | `{project_id, model_loaded, updates_applied, last_update_time, src_lang, tgt_lang}` |
//! | GET    | `/api/v1/health`           | `{status:"ok"}` |
//!
//! Every error is `{code, message}` with a matching status. All endpoints
//! except health require HTTP Basic credentials.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use adaptmt_core::adaptation::{AdaptiveSession, HypothesisLog, ModelConfig};
use adaptmt_core::metrics::hter;
use adaptmt_core::textpipe::Tokenizer;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tokio::net::TcpListener;
use tokio::sync::{OnceCell, RwLock, Semaphore};

use crate::checkpoint::{checkpoint, open_project, ProjectPaths};
use crate::error::{Error, Result};
use crate::files::read_text;
use crate::SystemClock;

/// Updates that may wait on one project before new ones are refused.
pub const UPDATE_QUEUE_DEPTH: usize = 64;

/// Environment variable naming the registry directory.
pub const CONFIG_ROOT_ENV: &str = "ADAPTMT_CONFIG_ROOT";

/// One API user: salted SHA-256 of the password and the projects it may use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiUser {
    pub username: String,
    pub salt: Vec<u8>,
    pub password_hash: [u8; 32],
    /// Project ids, or `*` for all.
    pub projects: Vec<String>,
}

pub fn hash_password(salt: &[u8], password: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(salt);
    h.update(password.as_bytes());
    h.finalize().into()
}

impl ApiUser {
    pub fn new(username: &str, password: &str, projects: &[&str]) -> Self {
        let salt: [u8; 16] = rand::random();
        ApiUser {
            username: username.into(),
            password_hash: hash_password(&salt, password),
            salt: salt.to_vec(),
            projects: projects.iter().map(|p| p.to_string()).collect(),
        }
    }

    /// `username:salt_hex:hash_hex:project,project`
    pub fn to_line(&self) -> String {
        format!(
            "{}:{}:{}:{}",
            self.username,
            hex::encode(&self.salt),
            hex::encode(self.password_hash),
            self.projects.join(",")
        )
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let bad = || Error::Invalid("credential lines are `user:salt_hex:sha256_hex:projects`".into());
        let parts: Vec<&str> = line.split(':').collect();
        let [user, salt, hash, projects] = parts[..] else {
            return Err(bad());
        };
        let password_hash: [u8; 32] = hex::decode(hash)
            .map_err(|_| bad())?
            .try_into()
            .map_err(|_| bad())?;
        Ok(ApiUser {
            username: user.into(),
            salt: hex::decode(salt).map_err(|_| bad())?,
            password_hash,
            projects: projects.split(',').filter(|p| !p.is_empty()).map(String::from).collect(),
        })
    }

    fn verify(&self, password: &str) -> bool {
        let h = hash_password(&self.salt, password);
        // Compare every byte so timing does not reveal the prefix length.
        h.iter().zip(&self.password_hash).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
    }

    fn may_use(&self, project: &str) -> bool {
        self.projects.iter().any(|p| p == "*" || p == project)
    }
}

/// Credential store; only salted hashes are held.
#[derive(Debug, Clone, Default)]
pub struct Credentials {
    users: HashMap<String, ApiUser>,
}

impl Credentials {
    pub fn new(users: Vec<ApiUser>) -> Self {
        Credentials {
            users: users.into_iter().map(|u| (u.username.clone(), u)).collect(),
        }
    }

    /// One [`ApiUser::to_line`] per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let users = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(ApiUser::from_line)
            .collect::<Result<Vec<_>>>()?;
        Ok(Credentials::new(users))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?)
    }

    fn authenticate(&self, headers: &HeaderMap) -> Option<&ApiUser> {
        let value = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
        let encoded = value.strip_prefix("Basic ")?;
        let decoded = base64::engine::general_purpose::STANDARD.decode(encoded.trim()).ok()?;
        let decoded = String::from_utf8(decoded).ok()?;
        let (user, password) = decoded.split_once(':')?;
        self.users.get(user).filter(|u| u.verify(password))
    }
}

struct Project {
    paths: ProjectPaths,
    session: Arc<RwLock<AdaptiveSession>>,
    hypotheses: Mutex<HypothesisLog>,
    queue: Arc<Semaphore>,
    saved_updates: AtomicU64,
}

/// Per-project sessions loaded from `<config_root>/<project_id>.conf` on
/// first use and kept for the life of the server.
pub struct Registry {
    config_root: PathBuf,
    slots: Mutex<HashMap<String, Arc<OnceCell<Arc<Project>>>>>,
}

enum Lookup {
    Found(Arc<Project>),
    Unknown,
    Failed(String),
}

fn valid_project_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        && !id.starts_with('.')
}

impl Registry {
    pub fn new(config_root: impl Into<PathBuf>) -> Self {
        Registry {
            config_root: config_root.into(),
            slots: Mutex::new(HashMap::new()),
        }
    }

    pub fn config_path(&self, project_id: &str) -> Option<PathBuf> {
        valid_project_id(project_id).then(|| self.config_root.join(format!("{project_id}.conf")))
    }

    fn loaded(&self, project_id: &str) -> Option<Arc<Project>> {
        let slots = self.slots.lock().expect("registry lock");
        slots.get(project_id).and_then(|c| c.get().cloned())
    }

    async fn lookup(&self, project_id: &str) -> Lookup {
        let Some(path) = self.config_path(project_id) else {
            return Lookup::Unknown;
        };
        if let Some(p) = self.loaded(project_id) {
            return Lookup::Found(p);
        }
        if !path.is_file() {
            return Lookup::Unknown;
        }
        let cell = {
            let mut slots = self.slots.lock().expect("registry lock");
            slots.entry(project_id.to_string()).or_default().clone()
        };
        let loaded = cell
            .get_or_try_init(|| async move {
                let (session, paths) = tokio::task::spawn_blocking(move || open_project(&path))
                    .await
                    .map_err(|e| Error::Invalid(e.to_string()))??;
                let saved = session.updates_applied();
                Ok::<_, Error>(Arc::new(Project {
                    paths,
                    session: Arc::new(RwLock::new(session.with_clock(Arc::new(SystemClock::new())))),
                    hypotheses: Mutex::new(HypothesisLog::default()),
                    queue: Arc::new(Semaphore::new(UPDATE_QUEUE_DEPTH)),
                    saved_updates: AtomicU64::new(saved),
                }))
            })
            .await;
        match loaded {
            Ok(p) => Lookup::Found(p.clone()),
            Err(e) => Lookup::Failed(e.to_string()),
        }
    }

    /// Writes a checkpoint for every loaded project with unsaved updates.
    pub async fn flush(&self) -> Result<usize> {
        let projects: Vec<Arc<Project>> = {
            let slots = self.slots.lock().expect("registry lock");
            slots.values().filter_map(|c| c.get().cloned()).collect()
        };
        let mut written = 0;
        for p in projects {
            let guard = p.session.clone().read_owned().await;
            let n = guard.updates_applied();
            if n == p.saved_updates.load(Ordering::SeqCst) {
                continue;
            }
            let path = p.paths.checkpoint.clone();
            tokio::task::spawn_blocking(move || checkpoint(&guard, &path))
                .await
                .map_err(|e| Error::Invalid(e.to_string()))??;
            p.saved_updates.store(n, Ordering::SeqCst);
            written += 1;
        }
        Ok(written)
    }
}

/// Shared server state.
pub struct AppState {
    pub registry: Registry,
    pub credentials: Credentials,
}

struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    fn malformed(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "malformed_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut r = (self.status, Json(json!({"code": self.code, "message": self.message}))).into_response();
        if self.status == StatusCode::UNAUTHORIZED {
            r.headers_mut()
                .insert(header::WWW_AUTHENTICATE, header::HeaderValue::from_static("Basic realm=\"adaptmt\""));
        }
        r
    }
}

type ApiResult = std::result::Result<Response, ApiError>;

fn parse_body(body: &Bytes) -> std::result::Result<serde_json::Map<String, Value>, ApiError> {
    match serde_json::from_slice::<Value>(body) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(ApiError::malformed("request body must be a JSON object")),
        Err(e) => Err(ApiError::malformed(format!("invalid JSON: {e}"))),
    }
}

fn str_field<'a>(obj: &'a serde_json::Map<String, Value>, key: &str, ctx: &str) -> std::result::Result<&'a str, ApiError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(ApiError::malformed(format!("field `{ctx}{key}` must be a string"))),
        None => Err(ApiError::malformed(format!("missing field `{ctx}{key}`"))),
    }
}

fn id_field(obj: &serde_json::Map<String, Value>, key: &str, ctx: &str) -> std::result::Result<Value, ApiError> {
    match obj.get(key) {
        Some(v @ (Value::String(_) | Value::Number(_))) => Ok(v.clone()),
        Some(_) => Err(ApiError::malformed(format!("field `{ctx}{key}` must be a string or number"))),
        None => Err(ApiError::malformed(format!("missing field `{ctx}{key}`"))),
    }
}

fn id_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn authorize<'a>(state: &'a AppState, headers: &HeaderMap) -> std::result::Result<&'a ApiUser, ApiError> {
    state
        .credentials
        .authenticate(headers)
        .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "valid HTTP Basic credentials required"))
}

async fn project(state: &AppState, user: &ApiUser, project_id: &str) -> std::result::Result<Arc<Project>, ApiError> {
    if !user.may_use(project_id) {
        return Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "forbidden",
            format!("user `{}` may not use project `{project_id}`", user.username),
        ));
    }
    match state.registry.lookup(project_id).await {
        Lookup::Found(p) => Ok(p),
        Lookup::Unknown => Err(ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_project",
            format!("no project `{project_id}`"),
        )),
        Lookup::Failed(e) => Err(ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "project_load_failed",
            format!("project `{project_id}` could not be loaded: {e}"),
        )),
    }
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
}

async fn translate(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let user = authorize(&state, &headers)?;
    let obj = parse_body(&body)?;
    let project_id = str_field(&obj, "project_id", "")?.to_string();
    let segments = match obj.get("segments") {
        Some(Value::Array(a)) => a,
        Some(_) => return Err(ApiError::malformed("field `segments` must be an array")),
        None => return Err(ApiError::malformed("missing field `segments`")),
    };
    let mut jobs = Vec::with_capacity(segments.len());
    for (i, seg) in segments.iter().enumerate() {
        let ctx = format!("segments[{i}].");
        let Value::Object(seg) = seg else {
            return Err(ApiError::malformed(format!("`segments[{i}]` must be an object")));
        };
        jobs.push((id_field(seg, "id", &ctx)?, str_field(seg, "src", &ctx)?.to_string()));
    }
    let p = project(&state, user, &project_id).await?;
    let guard = p.session.clone().read_owned().await;
    let results = tokio::task::spawn_blocking(move || {
        jobs.into_iter()
            .map(|(id, src)| guard.translate_segment(&src).map(|t| (id, src, t)))
            .collect::<std::result::Result<Vec<_>, _>>()
    })
    .await
    .map_err(internal)?
    .map_err(|e| match e {
        adaptmt_core::Error::Untranslatable => ApiError::malformed("a segment is empty after tokenization"),
        other => internal(other),
    })?;
    let mut log = p.hypotheses.lock().expect("hypothesis log");
    let out: Vec<Value> = results
        .into_iter()
        .map(|(id, src, t)| {
            log.record(&t, &src);
            json!({
                "id": id,
                "tgt": t.text,
                "hypothesis_id": t.hypothesis_id,
                "model_updates_seen": t.updates_seen,
            })
        })
        .collect();
    Ok(Json(json!({ "segments": out })).into_response())
}

async fn update(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let user = authorize(&state, &headers)?;
    let obj = parse_body(&body)?;
    let project_id = str_field(&obj, "project_id", "")?.to_string();
    let segment_id = id_text(&id_field(&obj, "segment_id", "")?);
    let src = str_field(&obj, "src", "")?.to_string();
    let post_edit = str_field(&obj, "post_edit", "")?.to_string();
    let hypothesis_id = match obj.get("hypothesis_id") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(ApiError::malformed("field `hypothesis_id` must be a string")),
    };
    let tok = Tokenizer::new();
    if tok.tokenize(&src).is_empty() {
        return Err(ApiError::malformed("field `src` is empty"));
    }
    if tok.tokenize(&post_edit).is_empty() {
        return Err(ApiError::malformed("field `post_edit` is empty"));
    }
    let p = project(&state, user, &project_id).await?;
    let hypothesis = hypothesis_id.and_then(|h| {
        let log = p.hypotheses.lock().expect("hypothesis log");
        log.get(&h).map(|(_, text)| text.to_string())
    });
    let _permit = p.queue.clone().try_acquire_owned().map_err(|_| {
        ApiError::new(
            StatusCode::CONFLICT,
            "update_queue_full",
            format!("{UPDATE_QUEUE_DEPTH} updates already pending for `{project_id}`"),
        )
    })?;
    let mut guard = p.session.clone().write_owned().await;
    let ckpt_path = p.paths.checkpoint.clone();
    let (report, saved) = tokio::task::spawn_blocking(move || {
        let pair = guard.pair_now(&segment_id, &src, &post_edit);
        let report = guard.confirm_and_update(pair)?;
        let saved = if guard.checkpoint_due() {
            checkpoint(&guard, &ckpt_path).map(|_| Some(guard.updates_applied())).unwrap_or(None)
        } else {
            None
        };
        Ok::<_, adaptmt_core::Error>((report, saved))
    })
    .await
    .map_err(internal)?
    .map_err(|e| match e {
        adaptmt_core::Error::Numeric(m) => ApiError::new(
            StatusCode::INTERNAL_SERVER_ERROR,
            "update_rolled_back",
            format!("numeric failure, parameters restored: {m}"),
        ),
        adaptmt_core::Error::EmptySequence(what) => ApiError::malformed(format!("field `{what}` is empty")),
        other => internal(other),
    })?;
    if let Some(n) = saved {
        p.saved_updates.store(n, Ordering::SeqCst);
    }
    let mut ack = json!({
        "accepted": true,
        "pre_loss": report.pre_loss,
        "post_loss": report.post_loss,
        "updates_applied": report.updates_applied,
        "elapsed_ms": report.elapsed.as_secs_f64() * 1000.0,
    });
    if let Some(h) = hypothesis {
        let post_edit = str_field(&obj, "post_edit", "")?;
        if let Ok(score) = hter(&tok.tokenize(&h), &tok.tokenize(post_edit)) {
            ack["hter"] = json!(score);
        }
    }
    Ok(Json(ack).into_response())
}

async fn status(State(state): State<Arc<AppState>>, headers: HeaderMap, UrlPath(project_id): UrlPath<String>) -> ApiResult {
    let user = authorize(&state, &headers)?;
    if !user.may_use(&project_id) {
        return Err(ApiError::new(StatusCode::FORBIDDEN, "forbidden", "project not permitted"));
    }
    let unknown = || ApiError::new(StatusCode::NOT_FOUND, "unknown_project", format!("no project `{project_id}`"));
    if let Some(p) = state.registry.loaded(&project_id) {
        let s = p.session.read().await;
        return Ok(Json(json!({
            "project_id": project_id,
            "model_loaded": true,
            "updates_applied": s.updates_applied(),
            "last_update_time": s.last_update_ms(),
            "src_lang": s.config().src_lang,
            "tgt_lang": s.config().tgt_lang,
        }))
        .into_response());
    }
    // Not loaded yet: answer from the config and checkpoint metadata
    // without building the model.
    let path = state.registry.config_path(&project_id).filter(|p| p.is_file()).ok_or_else(unknown)?;
    let (config, updates, last) = tokio::task::spawn_blocking(move || -> Result<(ModelConfig, u64, Option<u64>)> {
        let config = ModelConfig::parse(&read_text(&path)?)?;
        let paths = ProjectPaths::of(&path, &config);
        let (n, last) = crate::checkpoint::read_progress(&paths.checkpoint)?;
        Ok((config, n, last))
    })
    .await
    .map_err(internal)?
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "project_load_failed", e.to_string()))?;
    Ok(Json(json!({
        "project_id": project_id,
        "model_loaded": false,
        "updates_applied": updates,
        "last_update_time": last,
        "src_lang": config.src_lang,
        "tgt_lang": config.tgt_lang,
    }))
    .into_response())
}

async fn health() -> Response {
    Json(json!({"status": "ok"})).into_response()
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/v1/translate", post(translate))
        .route("/api/v1/update", post(update))
        .route("/api/v1/status/{project_id}", get(status))
        .route("/api/v1/health", get(health))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state)
}

/// A running server.
pub struct ServerHandle {
    pub addr: SocketAddr,
    state: Arc<AppState>,
    stop: tokio::sync::oneshot::Sender<()>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl ServerHandle {
    pub fn state(&self) -> &Arc<AppState> {
        &self.state
    }

    /// Stops accepting connections, drains in-flight requests and writes
    /// checkpoints for every project with unsaved updates.
    pub async fn shutdown(self) -> Result<usize> {
        let _ = self.stop.send(());
        self.task
            .await
            .map_err(|e| Error::Invalid(e.to_string()))?
            .map_err(|source| Error::Io {
                path: PathBuf::from("<server>"),
                source,
            })?;
        self.state.registry.flush().await
    }
}

/// Binds `bind` and serves in a background task.
pub async fn serve(bind: &str, registry: Registry, credentials: Credentials) -> Result<ServerHandle> {
    let listener = TcpListener::bind(bind).await.map_err(|source| Error::Io {
        path: PathBuf::from(bind),
        source,
    })?;
    let addr = listener.local_addr().map_err(|source| Error::Io {
        path: PathBuf::from(bind),
        source,
    })?;
    let state = Arc::new(AppState { registry, credentials });
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let app = router(state.clone());
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = stopped.await;
            })
            .await
    });
    Ok(ServerHandle { addr, state, stop, task })
}
