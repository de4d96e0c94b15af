//! HTTP API.
//!
//! | Method | Path                   | Purpose                                   |
//! |--------|------------------------|-------------------------------------------|
//! | GET    | `/api/v1/catalog`      | sources, variables, years, weights, levels |
//! | POST   | `/api/v1/aggregate`    | run a query, returns id and preview        |
//! | GET    | `/api/v1/download`     | `id`, `layout`, `format`                   |
//! | GET    | `/api/v1/preview/geo`  | `id`, `period`                             |
//!
//! Errors are `{"error": {"code": ..., "message": ...}}`.

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Query as UrlQuery, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Map, Value};
use tokio::sync::OnceCell;
use wclim_core::boundaries::AdminUnit;
use wclim_core::io::{read_boundaries, render_table, units_to_geojson, TableFormat, TableLayout};
use wclim_core::time::Period;
use wclim_core::{AdminLevel, UnitTable};

use crate::catalog::{Catalog, Plan};
use crate::error::{ApiError, ErrorCode};
use crate::pipeline;
use crate::query::RawQuery;

pub const DEFAULT_CACHE_BYTES: usize = 256 << 20;
pub const DEFAULT_PREVIEW_ROWS: usize = 100;

#[derive(Debug, Clone, Copy)]
pub struct ServiceConfig {
    /// Upper bound on the memory held by finished results.
    pub cache_bytes: usize,
    /// Long-layout rows returned inline by `POST /aggregate`.
    pub preview_rows: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            cache_bytes: DEFAULT_CACHE_BYTES,
            preview_rows: DEFAULT_PREVIEW_ROWS,
        }
    }
}

/// A finished query.
#[derive(Debug)]
pub struct Computed {
    pub plan: Plan,
    pub table: UnitTable,
}

impl Computed {
    fn size(&self) -> usize {
        let ids: usize = self.table.unit_ids().map(|u| u.len() + 48).sum();
        ids + self.table.n_units() * self.table.time.len() * 16 + 512
    }
}

/// Least-recently-used map bounded by approximate byte size.
#[derive(Debug)]
struct ResultCache {
    capacity: usize,
    used: usize,
    entries: HashMap<String, (Arc<Computed>, usize)>,
    order: VecDeque<String>,
}

impl ResultCache {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            used: 0,
            entries: HashMap::new(),
            order: VecDeque::new(),
        }
    }

    fn touch(&mut self, id: &str) {
        if let Some(pos) = self.order.iter().position(|k| k == id) {
            let key = self.order.remove(pos).expect("position is in range");
            self.order.push_back(key);
        }
    }

    fn get(&mut self, id: &str) -> Option<Arc<Computed>> {
        let hit = self.entries.get(id).map(|(c, _)| c.clone());
        if hit.is_some() {
            self.touch(id);
        }
        hit
    }

    fn insert(&mut self, id: String, value: Arc<Computed>) {
        if self.entries.contains_key(&id) {
            self.touch(&id);
            return;
        }
        let size = value.size();
        // Always keep the newest entry, even if it alone exceeds capacity.
        while self.used + size > self.capacity {
            let Some(old) = self.order.pop_front() else { break };
            if let Some((_, s)) = self.entries.remove(&old) {
                self.used -= s;
            }
        }
        self.used += size;
        self.order.push_back(id.clone());
        self.entries.insert(id, (value, size));
    }
}

type Flight = Arc<OnceCell<Result<Arc<Computed>, ApiError>>>;

pub struct AppState {
    catalog: Result<Arc<Catalog>, ApiError>,
    config: ServiceConfig,
    results: Mutex<ResultCache>,
    inflight: Mutex<HashMap<String, Flight>>,
    boundaries: HashMap<AdminLevel, OnceCell<Arc<Vec<AdminUnit>>>>,
}

impl AppState {
    /// Open the data directory. A missing or corrupt index is kept as an
    /// error and reported by every endpoint that needs the catalog.
    pub fn open(data_dir: impl Into<PathBuf>, config: ServiceConfig) -> Self {
        let catalog = Catalog::open(data_dir).map(Arc::new);
        if let Err(e) = &catalog {
            tracing::warn!(error = %e, "catalog unavailable");
        }
        Self::with_catalog(catalog, config)
    }

    pub fn with_catalog(catalog: Result<Arc<Catalog>, ApiError>, config: ServiceConfig) -> Self {
        Self {
            catalog,
            config,
            results: Mutex::new(ResultCache::new(config.cache_bytes)),
            inflight: Mutex::new(HashMap::new()),
            boundaries: [AdminLevel::Gadm0, AdminLevel::Gadm1]
                .into_iter()
                .map(|l| (l, OnceCell::new()))
                .collect(),
        }
    }

    pub fn catalog(&self) -> Result<&Arc<Catalog>, ApiError> {
        self.catalog.as_ref().map_err(Clone::clone)
    }

    /// Validate, plan and run `raw`, sharing work between identical
    /// concurrent queries and reusing cached results.
    pub async fn aggregate(&self, raw: &RawQuery) -> Result<Arc<Computed>, ApiError> {
        let query = raw.validate()?;
        let catalog = self.catalog()?.clone();
        let plan = catalog.plan(&query)?;
        let id = plan.id.clone();
        if let Some(hit) = self.results.lock().expect("result cache lock").get(&id) {
            return Ok(hit);
        }
        let flight = self
            .inflight
            .lock()
            .expect("in-flight lock")
            .entry(id.clone())
            .or_default()
            .clone();
        let out = flight
            .get_or_init(|| async move {
                let span_id = plan.id.clone();
                tokio::task::spawn_blocking(move || {
                    let table = pipeline::run(&catalog, &plan)?;
                    Ok(Arc::new(Computed { plan, table }))
                })
                .await
                .unwrap_or_else(|e| Err(ApiError::internal(format!("query {span_id} panicked: {e}"))))
            })
            .await
            .clone();
        if let Ok(done) = &out {
            self.results
                .lock()
                .expect("result cache lock")
                .insert(id.clone(), done.clone());
        }
        self.inflight.lock().expect("in-flight lock").remove(&id);
        out
    }

    /// A finished result by id.
    pub fn result(&self, id: &str) -> Result<Arc<Computed>, ApiError> {
        self.results
            .lock()
            .expect("result cache lock")
            .get(id)
            .ok_or_else(|| ApiError::new(ErrorCode::UnknownResult, format!("no result with id `{id}`")))
    }

    async fn units(&self, level: AdminLevel) -> Result<Arc<Vec<AdminUnit>>, ApiError> {
        let catalog = self.catalog()?.clone();
        let cell = self.boundaries.get(&level).expect("every level has a slot");
        cell.get_or_try_init(|| async move {
            let file = catalog.boundaries(level).cloned().ok_or_else(|| {
                ApiError::new(ErrorCode::DataUnavailable, format!("no {level} boundaries"))
            })?;
            let path = catalog.path(&file.path);
            tokio::task::spawn_blocking(move || read_boundaries(path, level))
                .await
                .map_err(ApiError::internal)?
                .map(Arc::new)
                .map_err(ApiError::from)
        })
        .await
        .cloned()
    }
}

/// `POST /aggregate` response body.
pub fn aggregate_body(done: &Computed, preview_rows: usize) -> Value {
    let t = &done.table;
    let preview: Vec<Value> = t
        .triples()
        .into_iter()
        .take(preview_rows)
        .map(|(unit, period, value)| json!({ "unit_id": unit, "period": period, "value": value }))
        .collect();
    json!({
        "id": done.plan.id,
        "query": done.plan.query.canonical(),
        "measure": t.measure,
        "frequency": t.time.frequency().as_str(),
        "units": t.n_units(),
        "periods": t.time.labels(),
        "rows": t.n_units() * t.time.len(),
        "preview": preview,
    })
}

/// File name for a download of `done`.
pub fn download_name(done: &Computed, layout: TableLayout, format: TableFormat) -> String {
    let q = &done.plan.query;
    let measure = match q.threshold {
        Some(t) => format!("_{}", t.mode.as_str()),
        None => String::new(),
    };
    format!(
        "{}_{}{}_{}_{}-{}_{}.{}",
        q.source,
        q.variable,
        measure,
        q.scheme,
        q.from,
        q.to,
        layout,
        format.as_str()
    )
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.code.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        if status.is_server_error() {
            tracing::error!(code = %self.code, message = %self.message, "request failed");
        }
        (status, Json(self.body())).into_response()
    }
}

type Params = Result<UrlQuery<HashMap<String, String>>, axum::extract::rejection::QueryRejection>;

fn params(p: Params) -> Result<HashMap<String, String>, ApiError> {
    p.map(|UrlQuery(m)| m)
        .map_err(|e| ApiError::new(ErrorCode::InvalidField, e.body_text()))
}

fn param<'a>(map: &'a HashMap<String, String>, name: &str) -> Result<&'a str, ApiError> {
    map.get(name)
        .map(String::as_str)
        .ok_or_else(|| ApiError::new(ErrorCode::InvalidField, format!("`{name}` is required")))
}

async fn catalog_handler(State(state): State<Arc<AppState>>) -> Result<Json<Value>, ApiError> {
    Ok(Json(state.catalog()?.document()))
}

async fn aggregate_handler(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let raw = RawQuery::from_json(&body)?;
    let done = state.aggregate(&raw).await?;
    Ok(Json(aggregate_body(&done, state.config.preview_rows)))
}

async fn download_handler(State(state): State<Arc<AppState>>, p: Params) -> Result<Response, ApiError> {
    let map = params(p)?;
    let done = state.result(param(&map, "id")?)?;
    let bad = |e: wclim_core::Error| ApiError::new(ErrorCode::InvalidField, e.to_string());
    let layout: TableLayout = match map.get("layout") {
        Some(l) => l.parse().map_err(bad)?,
        None => done.plan.query.layout,
    };
    let format: TableFormat = match map.get("format") {
        Some(f) => f.parse().map_err(bad)?,
        None => done.plan.query.format,
    };
    let render = done.clone();
    let bytes = tokio::task::spawn_blocking(move || render_table(&render.table, layout, format))
        .await
        .map_err(ApiError::internal)??;
    let disposition = format!("attachment; filename=\"{}\"", download_name(&done, layout, format));
    let mut resp = (StatusCode::OK, bytes).into_response();
    let headers = resp.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static(format.content_type()));
    if let Ok(v) = HeaderValue::from_str(&disposition) {
        headers.insert(header::CONTENT_DISPOSITION, v);
    }
    Ok(resp)
}

async fn geo_handler(State(state): State<Arc<AppState>>, p: Params) -> Result<Json<Value>, ApiError> {
    let map = params(p)?;
    let done = state.result(param(&map, "id")?)?;
    let t = &done.table;
    let index = match map.get("period") {
        None => 0,
        Some(label) => Period::parse(label, t.time.frequency())
            .ok()
            .and_then(|p| t.time.position(&p))
            .ok_or_else(|| {
                ApiError::new(
                    ErrorCode::PeriodOutsideResult,
                    format!(
                        "period `{label}` is not in the result ({}..{})",
                        t.time.labels().first().cloned().unwrap_or_default(),
                        t.time.labels().last().cloned().unwrap_or_default()
                    ),
                )
            })?,
    };
    let label = t.time.period(index).map(|p| p.label()).unwrap_or_default();
    let units = state.units(t.level).await?;
    let mut doc = units_to_geojson(&units);
    if let Some(features) = doc["features"].as_array_mut() {
        for (feature, unit) in features.iter_mut().zip(units.iter()) {
            let value = t.get(&unit.unit_id, index).flatten();
            if let Some(Value::Object(props)) = feature.get_mut("properties") {
                props.insert("period".into(), json!(label));
                props.insert("value".into(), json!(value));
                props.insert("na".into(), json!(value.is_none()));
            }
        }
    }
    let mut meta = Map::new();
    meta.insert("id".into(), json!(done.plan.id));
    meta.insert("period".into(), json!(label));
    meta.insert("measure".into(), json!(t.measure));
    meta.insert("variable".into(), json!(t.variable.as_str()));
    if let Value::Object(obj) = &mut doc {
        obj.insert("result".into(), Value::Object(meta));
    }
    Ok(Json(doc))
}

async fn not_found() -> ApiError {
    ApiError::new(ErrorCode::NotFound, "no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/v1/catalog", get(catalog_handler))
        .route("/api/v1/aggregate", post(aggregate_handler))
        .route("/api/v1/download", get(download_handler))
        .route("/api/v1/preview/geo", get(geo_handler))
        .fallback(not_found)
        .with_state(state)
}

/// Serve until the process is stopped.
pub async fn serve(addr: SocketAddr, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}
