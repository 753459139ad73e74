//! JSON routes under `/api`, plus the agent export route.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use qosrank::ahp::{convergence_gap, ComparisonMatrix, Judgment, WeightVector};
use qosrank::catalog::{ComputeOffer, NetworkOffer, OfferKind, StorageOffer};
use qosrank::qos::{parse_samples, write_samples, QosAverage, RowError};
use qosrank::ranking::{FieldError, RankError, RankRequest, SortOrder};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::response::{rank_response, Page, RankResponse, DEFAULT_LIMIT};
use crate::state::AppState;

#[derive(Debug)]
pub enum ApiError {
    Invalid(Vec<FieldError>),
    Unauthorized,
    Forbidden(&'static str),
    UnsupportedMediaType(&'static str),
    NoCatalog,
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fields: Vec<FieldError>,
}

impl ApiError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError::Invalid(vec![FieldError::new(field, message)])
    }
}

impl From<RankError> for ApiError {
    fn from(e: RankError) -> Self {
        match e {
            RankError::Invalid(fields) => ApiError::Invalid(fields),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, error, fields) = match self {
            ApiError::Invalid(fields) => (StatusCode::BAD_REQUEST, "invalid request".to_string(), fields),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, "missing or wrong bearer token".into(), vec![]),
            ApiError::Forbidden(why) => (StatusCode::FORBIDDEN, why.into(), vec![]),
            ApiError::UnsupportedMediaType(want) => (
                StatusCode::UNSUPPORTED_MEDIA_TYPE,
                format!("expected content type {want}"),
                vec![],
            ),
            ApiError::NoCatalog => (StatusCode::CONFLICT, "no catalog loaded".into(), vec![]),
            ApiError::Internal(message) => (StatusCode::INTERNAL_SERVER_ERROR, message, vec![]),
        };
        (status, Json(ErrorBody { error, fields })).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/rank", post(rank))
        .route("/api/weights", post(weights))
        .route("/api/catalog/import", post(import_catalog))
        .route("/api/catalog/offers", get(offers))
        .route("/api/qos/import", post(import_qos))
        .route("/api/qos/averages", get(averages))
        .route("/export", get(export))
        .with_state(state)
}

fn require_content_type(headers: &HeaderMap, accepted: &[&'static str]) -> Result<(), ApiError> {
    let given = headers
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.split(';').next())
        .map(|v| v.trim().to_ascii_lowercase());
    match given {
        Some(g) if accepted.contains(&g.as_str()) => Ok(()),
        _ => Err(ApiError::UnsupportedMediaType(accepted[0])),
    }
}

/// Deserializes a JSON body, naming the offending field on failure.
fn parse_json<T: DeserializeOwned>(headers: &HeaderMap, body: &[u8]) -> Result<T, ApiError> {
    require_content_type(headers, &["application/json"])?;
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "body".to_string() } else { path };
        ApiError::field(field, e.into_inner().to_string())
    })
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
}

fn authorize(headers: &HeaderMap, expected: Option<&str>, unset: &'static str) -> Result<(), ApiError> {
    let Some(expected) = expected else {
        return Err(ApiError::Forbidden(unset));
    };
    match bearer(headers) {
        Some(token) if token == expected => Ok(()),
        _ => Err(ApiError::Unauthorized),
    }
}

fn text(body: &Bytes) -> Result<&str, ApiError> {
    std::str::from_utf8(body).map_err(|e| ApiError::field("body", format!("not UTF-8: {e}")))
}

#[derive(Debug, Deserialize)]
struct RankQuery {
    limit: Option<usize>,
    offset: Option<usize>,
    order: Option<SortOrder>,
}

async fn rank(
    State(state): State<Arc<AppState>>,
    Query(q): Query<RankQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<RankResponse>, ApiError> {
    let request: RankRequest = parse_json(&headers, &body)?;
    let catalog = state.catalog.snapshot().ok_or(ApiError::NoCatalog)?;
    let averages = state.qos.averages();
    let page = Page {
        limit: q.limit.unwrap_or(DEFAULT_LIMIT),
        offset: q.offset.unwrap_or(0),
    };
    let order = q.order.unwrap_or_default();
    let response = tokio::task::spawn_blocking(move || {
        rank_response(request, &catalog, &averages, order, page)
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(response))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct WeightsResponse {
    pub weights: WeightVector,
    pub convergence_gap: f64,
}

async fn weights(headers: HeaderMap, body: Bytes) -> Result<Json<WeightsResponse>, ApiError> {
    let judgments: Vec<Judgment> = parse_json(&headers, &body)?;
    let m = ComparisonMatrix::from_judgments(&judgments).map_err(|e| ApiError::field("judgments", e.to_string()))?;
    Ok(Json(WeightsResponse {
        weights: m.weights(),
        convergence_gap: convergence_gap(&m),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CatalogImported {
    pub catalog_version: u64,
    pub offers: usize,
}

async fn import_catalog(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Json<CatalogImported>, ApiError> {
    authorize(&headers, state.admin_token.as_deref(), "imports are disabled: no admin token configured")?;
    require_content_type(&headers, &["application/json"])?;
    let text = text(&body)?;
    let version = state.catalog.import_json(text).map_err(|e| {
        let field = e.record().unwrap_or("body").to_string();
        ApiError::field(field, e.to_string())
    })?;
    state.save_catalog(text).map_err(|e| ApiError::Internal(e.to_string()))?;
    let offers = state.catalog.snapshot().map_or(0, |c| c.offer_count());
    tracing::info!(version, offers, "catalog imported");
    Ok(Json(CatalogImported {
        catalog_version: version,
        offers,
    }))
}

#[derive(Debug, Deserialize)]
struct OffersQuery {
    kind: Option<OfferKind>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct OffersResponse {
    pub catalog_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compute: Option<Vec<ComputeOffer>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage: Option<Vec<StorageOffer>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<Vec<NetworkOffer>>,
}

async fn offers(
    State(state): State<Arc<AppState>>,
    Query(q): Query<OffersQuery>,
) -> Result<Json<OffersResponse>, ApiError> {
    let catalog = state.catalog.snapshot().ok_or(ApiError::NoCatalog)?;
    let wants = |k: OfferKind| q.kind.is_none() || q.kind == Some(k);
    Ok(Json(OffersResponse {
        catalog_version: catalog.version,
        compute: wants(OfferKind::Compute).then(|| catalog.compute.clone()),
        storage: wants(OfferKind::Storage).then(|| catalog.storage.clone()),
        network: wants(OfferKind::Network).then(|| catalog.network.clone()),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct QosImported {
    pub inserted: usize,
    pub duplicates: usize,
    pub rejected: Vec<RowError>,
}

async fn import_qos(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<(StatusCode, Json<QosImported>), ApiError> {
    authorize(&headers, state.admin_token.as_deref(), "imports are disabled: no admin token configured")?;
    require_content_type(&headers, &["text/csv", "text/plain"])?;
    let parsed = parse_samples(text(&body)?);
    if parsed.samples.is_empty() {
        if let Some(e) = parsed.errors.iter().find(|e| e.line == 1) {
            return Err(ApiError::field("body", format!("line 1: {}", e.message)));
        }
    }
    let report = state.ingest(&parsed.samples).map_err(|e| ApiError::Internal(e.to_string()))?;
    let status = if parsed.errors.is_empty() {
        StatusCode::OK
    } else {
        StatusCode::MULTI_STATUS
    };
    Ok((
        status,
        Json(QosImported {
            inserted: report.inserted,
            duplicates: report.duplicates,
            rejected: parsed.errors,
        }),
    ))
}

#[derive(Debug, Deserialize)]
struct AveragesQuery {
    client_location: Option<String>,
}

async fn averages(State(state): State<Arc<AppState>>, Query(q): Query<AveragesQuery>) -> Json<Vec<QosAverage>> {
    let all = state.qos.averages();
    Json(
        all.iter()
            .filter(|a| q.client_location.as_ref().is_none_or(|c| &a.key.client_location == c))
            .cloned()
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
struct ExportQuery {
    #[serde(default)]
    since: i64,
}

/// Samples taken at or after `since`, as CSV, for a pulling master.
async fn export(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ExportQuery>,
    headers: HeaderMap,
) -> Result<impl IntoResponse, ApiError> {
    authorize(&headers, state.agent_token.as_deref(), "export is disabled: no agent token configured")?;
    let csv = write_samples(&state.qos.samples_since(q.since));
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv))
}
