use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use morph_core::corpus::review::{Action, Decision, Reason, ReviewError, ReviewItem, Status};
use morph_core::corpus::CorpusStats;
use morph_core::lexicon::{validate_lexicon, LexiconError, LexiconStats, LexiconWarning, MorphEntry, MorphKind, MorphLexicon};
use morph_core::resolver::{Resolution, ResolveMode, Resolver, ResolverConfig};
use morph_core::MorphSpan;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::store::{Store, StoreError};

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Required as `Authorization: Bearer <token>` on every route but health.
    pub token: Option<String>,
    /// Static UI assets served at `/`.
    pub ui_dir: Option<PathBuf>,
    pub resolver: ResolverConfig,
}

struct Shared {
    store: RwLock<Store>,
    resolvers: RwLock<Option<(Arc<MorphLexicon>, ResolveMode, Arc<Resolver>)>>,
    config: ServiceConfig,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

impl AppState {
    pub fn new(store: Store, config: ServiceConfig) -> Self {
        AppState(Arc::new(Shared { store: RwLock::new(store), resolvers: RwLock::new(None), config }))
    }

    pub fn revision(&self) -> u64 {
        self.0.store.read().expect("store lock").revision()
    }

    pub fn with_store<T>(&self, f: impl FnOnce(&Store) -> T) -> T {
        f(&self.0.store.read().expect("store lock"))
    }

    /// A resolver over the current lexicon, rebuilt only when the lexicon or mode changed.
    fn resolver(&self, mode: ResolveMode) -> Result<Arc<Resolver>, ApiError> {
        let lexicon = self.with_store(|s| s.state().lexicon.clone());
        if let Some((lex, m, r)) = self.0.resolvers.read().expect("resolver lock").as_ref() {
            if **lex == lexicon && *m == mode {
                return Ok(r.clone());
            }
        }
        let lexicon = Arc::new(lexicon);
        let config = ResolverConfig { mode, ..self.0.config.resolver.clone() };
        let resolver = Arc::new(Resolver::new(lexicon.clone(), config).map_err(|e| ApiError::bad_request(e.to_string()))?);
        *self.0.resolvers.write().expect("resolver lock") = Some((lexicon, mode, resolver.clone()));
        Ok(resolver)
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into() }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.code, message: self.message })).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let msg = e.to_string();
        match e {
            StoreError::ReadOnly => ApiError::new(StatusCode::FORBIDDEN, "read_only", msg),
            StoreError::Review(ReviewError::UnknownItem(_)) => ApiError::not_found(msg),
            StoreError::Review(ReviewError::StaleItem(_)) | StoreError::Review(ReviewError::ConflictingDecision(_)) => {
                ApiError::new(StatusCode::CONFLICT, "stale_item", msg)
            }
            StoreError::Review(ReviewError::InvalidSpans { .. }) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_spans", msg),
            StoreError::Review(ReviewError::Lexicon(LexiconError::DuplicateVariant { .. })) | StoreError::Lexicon(LexiconError::DuplicateVariant { .. }) => {
                ApiError::new(StatusCode::CONFLICT, "duplicate_variant", msg)
            }
            StoreError::Review(ReviewError::Lexicon(LexiconError::InvalidVariant { .. })) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_variant", msg)
            }
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", msg),
        }
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/queue", get(get_queue))
        .route("/api/items/{id}", get(get_item))
        .route("/api/items/{id}/decision", post(post_decision))
        .route("/api/resolve", post(post_resolve))
        .route("/api/lexicon", get(get_lexicon))
        .route("/api/lexicon/entries", post(post_lexicon_entry))
        .route("/api/lexicon/validate", get(get_lexicon_validate))
        .route("/api/stats", get(get_stats))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token))
        .route("/api/health", get(get_health));
    let app = match &state.0.config.ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.with_state(state)
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.0.config.token {
        let given = req.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub revision: u64,
    pub readonly: bool,
}

async fn get_health(State(state): State<AppState>) -> Json<Health> {
    let (revision, readonly) = state.with_store(|s| (s.revision(), s.is_readonly()));
    Json(Health { status: "ok".into(), revision, readonly })
}

#[derive(Debug, Deserialize)]
struct QueueQuery {
    status: Option<String>,
    reason: Option<Reason>,
    page: Option<usize>,
    per_page: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QueuePage {
    pub items: Vec<ReviewItem>,
    pub page: usize,
    pub per_page: usize,
    pub total: usize,
    pub pages: usize,
    pub revision: u64,
}

const MAX_PER_PAGE: usize = 500;

async fn get_queue(State(state): State<AppState>, Query(q): Query<QueueQuery>) -> ApiResult<QueuePage> {
    let status: Option<Status> = q.status.as_deref().map(str::parse).transpose().map_err(ApiError::bad_request)?;
    let page = q.page.unwrap_or(1).max(1);
    let per_page = q.per_page.unwrap_or(50).clamp(1, MAX_PER_PAGE);
    state.with_store(|s| {
        let mut items: Vec<&ReviewItem> = s
            .state()
            .queue
            .iter()
            .filter(|i| status.is_none_or(|st| i.status == st) && q.reason.is_none_or(|r| i.reason == r))
            .collect();
        items.sort_by(|a, b| (a.reason, &a.id).cmp(&(b.reason, &b.id)));
        let total = items.len();
        Ok(Json(QueuePage {
            items: items.into_iter().skip((page - 1) * per_page).take(per_page).cloned().collect(),
            page,
            per_page,
            total,
            pages: total.div_ceil(per_page),
            revision: s.revision(),
        }))
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ItemResponse {
    pub item: ReviewItem,
    pub revision: u64,
}

async fn get_item(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<ItemResponse> {
    state.with_store(|s| {
        let item = s.state().item(&id).cloned().ok_or_else(|| ApiError::not_found(format!("no review item `{id}`")))?;
        Ok(Json(ItemResponse { item, revision: s.revision() }))
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub action: Action,
    #[serde(default)]
    pub spans: Option<Vec<MorphSpan>>,
    #[serde(default)]
    pub reviewer: Option<String>,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Runs a store mutation off the async workers; the write lock serializes writers.
async fn mutate<T: Send + 'static>(state: &AppState, f: impl FnOnce(&mut Store) -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    let shared = state.0.clone();
    tokio::task::spawn_blocking(move || f(&mut shared.store.write().expect("store lock")))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn post_decision(State(state): State<AppState>, Path(id): Path<String>, Json(req): Json<DecisionRequest>) -> ApiResult<ItemResponse> {
    let decision = Decision { item: id, action: req.action, spans: req.spans, reviewer: req.reviewer, timestamp: Some(now()) };
    mutate(&state, move |s| {
        s.decide(&decision)?;
        let item = s.state().item(&decision.item).cloned().expect("decided item exists");
        log::info!("{} {:?} at revision {}", item.id, item.status, s.revision());
        Ok(Json(ItemResponse { item, revision: s.revision() }))
    })
    .await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResolveRequest {
    pub text: String,
    #[serde(default)]
    pub mode: Option<ResolveMode>,
}

async fn post_resolve(State(state): State<AppState>, Json(req): Json<ResolveRequest>) -> ApiResult<Resolution> {
    let mode = req.mode.unwrap_or(state.0.config.resolver.mode);
    if mode == ResolveMode::Backend {
        return Err(ApiError::bad_request("backend mode is not available for ad-hoc resolution"));
    }
    let resolver = state.resolver(mode)?;
    Ok(Json(resolver.resolve(&req.text)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LexiconResponse {
    pub entries: Vec<MorphEntry>,
    pub stats: LexiconStats,
    pub revision: u64,
}

async fn get_lexicon(State(state): State<AppState>) -> ApiResult<LexiconResponse> {
    state.with_store(|s| {
        let lex = &s.state().lexicon;
        Ok(Json(LexiconResponse { entries: lex.entries().to_vec(), stats: lex.stats(), revision: s.revision() }))
    })
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NewVariant {
    pub original: String,
    pub surface: String,
    #[serde(default)]
    pub kind: Option<MorphKind>,
    #[serde(default)]
    pub reviewer: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EntryResponse {
    pub entry: MorphEntry,
    pub revision: u64,
}

async fn post_lexicon_entry(State(state): State<AppState>, Json(req): Json<NewVariant>) -> Result<(StatusCode, Json<EntryResponse>), ApiError> {
    let kind = req.kind.unwrap_or_else(|| morph_core::corpus::review::infer_kind(&req.surface, &req.original));
    let body = mutate(&state, move |s| {
        s.add_variant(&req.original, &req.surface, kind, req.reviewer.clone(), Some(now()))?;
        let entry = s.state().lexicon.entry(&req.original).cloned().expect("entry just written");
        Ok(EntryResponse { entry, revision: s.revision() })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(body)))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ValidateResponse {
    pub warnings: Vec<LexiconWarning>,
    pub revision: u64,
}

async fn get_lexicon_validate(State(state): State<AppState>) -> ApiResult<ValidateResponse> {
    let resolver = state.resolver(ResolveMode::Dict)?;
    state.with_store(|s| {
        let warnings = validate_lexicon(&s.state().lexicon, resolver.table());
        Ok(Json(ValidateResponse { warnings, revision: s.revision() }))
    })
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct QueueStats {
    pub pending: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub edited: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StatsResponse {
    pub corpus: CorpusStats,
    pub lexicon: LexiconStats,
    pub queue: QueueStats,
    pub revision: u64,
}

async fn get_stats(State(state): State<AppState>) -> ApiResult<StatsResponse> {
    state.with_store(|s| {
        let mut queue = QueueStats::default();
        for i in &s.state().queue {
            match i.status {
                Status::Pending => queue.pending += 1,
                Status::Accepted => queue.accepted += 1,
                Status::Rejected => queue.rejected += 1,
                Status::Edited => queue.edited += 1,
            }
        }
        Ok(Json(StatsResponse { corpus: s.state().corpus.stats(), lexicon: s.state().lexicon.stats(), queue, revision: s.revision() }))
    })
}
