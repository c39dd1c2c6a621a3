use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Multipart, Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetSource, SyntheticDatasetRequest};
use super::jobs::Service;
use crate::error::Error;
use crate::geo::{CellId, Resolution};
use crate::mobility::DatasetOptions;
use crate::risk::Category;
use crate::time::Horizon;

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, kind, field) = match &self.0 {
            Error::InvalidInput { field, .. } => (StatusCode::BAD_REQUEST, "invalid_input", Some(field.clone())),
            Error::Parse { .. } => (StatusCode::BAD_REQUEST, "parse", None),
            Error::NotFound { .. } => (StatusCode::NOT_FOUND, "not_found", None),
            Error::Capacity { .. } => (StatusCode::PAYLOAD_TOO_LARGE, "capacity", None),
            Error::NotReady { .. } => (StatusCode::CONFLICT, "not_ready", None),
            Error::Integrity { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "integrity", None),
            Error::Io(_) | Error::Json(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", None),
        };
        let body = ErrorBody {
            error: self.0.to_string(),
            kind,
            field,
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Parses a JSON body, reporting the path of the first offending field.
fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, Error> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::invalid(
            if path == "." { "body".to_string() } else { path },
            e.into_inner().to_string(),
        )
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, Error> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?
        .map_err(ApiError)
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/v1/datasets", post(upload_dataset).get(list_datasets))
        .route("/v1/datasets/synthetic", post(synthetic_dataset))
        .route("/v1/datasets/{id}", get(dataset_summary))
        .route("/v1/datasets/{id}/workplaces", get(workplaces))
        .route("/v1/poi/layers", get(poi_layers))
        .route("/v1/simulations", post(submit).get(list_jobs))
        .route("/v1/simulations/{job}", get(job))
        .route("/v1/simulations/{job}/config", get(job_config))
        .route("/v1/simulations/{job}/curve", get(curve))
        .route("/v1/simulations/{job}/severity", get(severity))
        .route("/v1/simulations/{job}/severity/{cell}/hourly", get(hourly))
        .route("/v1/comparisons", post(compare))
        .with_state(service)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    service: Arc<Service>,
    listener: tokio::net::TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}

type Svc = State<Arc<Service>>;

async fn synthetic_dataset(State(s): Svc, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: SyntheticDatasetRequest = parse_body(&body)?;
    let summary = blocking(move || s.register_dataset(DatasetSource::Synthetic(req))).await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn upload_dataset(State(s): Svc, mut form: Multipart) -> ApiResult<impl IntoResponse> {
    let mut trajectories = None;
    let mut pois = None;
    let mut options = DatasetOptions::default();
    let mut horizon: Option<Horizon> = None;
    let bad = |e: axum::extract::multipart::MultipartError| Error::invalid("multipart", e.body_text());
    while let Some(field) = form.next_field().await.map_err(bad)? {
        let name = field.name().unwrap_or_default().to_string();
        let text = field.text().await.map_err(bad)?;
        match name.as_str() {
            "trajectories" => trajectories = Some(text),
            "pois" => pois = Some(text),
            "options" => options = parse_body(text.as_bytes())?,
            "horizon" => horizon = Some(parse_body(text.as_bytes())?),
            other => return Err(Error::invalid("multipart", format!("unexpected part {other:?}")).into()),
        }
    }
    let trajectories_csv = trajectories.ok_or_else(|| Error::invalid("trajectories", "missing CSV part"))?;
    let source = DatasetSource::Upload {
        trajectories_csv,
        pois_csv: pois,
        horizon,
        options,
    };
    let summary = blocking(move || s.register_dataset(source)).await?;
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn list_datasets(State(s): Svc) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.dataset_ids()?))
}

async fn dataset_summary(State(s): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || s.dataset(&id).map(|d| d.summary())).await?))
}

#[derive(Deserialize)]
struct ResQuery {
    res: Option<u8>,
}

fn resolution(q: Option<u8>) -> Result<Option<Resolution>, Error> {
    q.map(|l| Resolution::new(l).map_err(|_| Error::invalid("res", format!("{l} is not a resolution level"))))
        .transpose()
}

async fn workplaces(State(s): Svc, Path(id): Path<String>, Query(q): Query<ResQuery>) -> ApiResult<impl IntoResponse> {
    let res = resolution(q.res)?;
    let payload = blocking(move || {
        let ds = s.dataset(&id)?;
        ds.workplaces(res.unwrap_or(ds.trajectories.resolution()))
    })
    .await?;
    Ok(Json(payload))
}

#[derive(Deserialize)]
struct LayerQuery {
    categories: Option<String>,
    dataset: Option<String>,
}

#[derive(Serialize)]
struct PoiLayers {
    dataset_id: String,
    /// Category to `[lon, lat]` points.
    layers: BTreeMap<Category, Vec<[f64; 2]>>,
}

const DEFAULT_LAYERS: [&str; 5] = ["entertainment", "restaurant", "station", "public_space", "supermarket"];

async fn poi_layers(State(s): Svc, Query(q): Query<LayerQuery>) -> ApiResult<impl IntoResponse> {
    let categories: Vec<Category> = match &q.categories {
        Some(list) => list
            .split(',')
            .filter(|c| !c.trim().is_empty())
            .map(Category::new)
            .collect(),
        None => DEFAULT_LAYERS.iter().map(|c| Category::new(c)).collect(),
    };
    let payload = blocking(move || {
        let id = match q.dataset {
            Some(id) => id,
            None => s
                .dataset_ids()?
                .pop()
                .ok_or_else(|| Error::not_found("dataset", "(none registered)"))?,
        };
        let ds = s.dataset(&id)?;
        Ok(PoiLayers {
            dataset_id: id,
            layers: ds.pois.layers(&categories),
        })
    })
    .await?;
    Ok(Json(payload))
}

async fn submit(State(s): Svc, body: Bytes) -> ApiResult<impl IntoResponse> {
    let cfg = parse_body(&body)?;
    let resp = blocking(move || s.submit(cfg)).await?;
    let status = if resp.cached {
        StatusCode::OK
    } else {
        StatusCode::ACCEPTED
    };
    Ok((status, Json(resp)))
}

async fn list_jobs(State(s): Svc) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.jobs(50)))
}

async fn job(State(s): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(s.job(&id)?))
}

async fn job_config(State(s): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || s.config(&id)).await?))
}

async fn curve(State(s): Svc, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || s.curve(&id)).await?))
}

async fn severity(State(s): Svc, Path(id): Path<String>, Query(q): Query<ResQuery>) -> ApiResult<impl IntoResponse> {
    let res = resolution(q.res)?;
    Ok(Json(blocking(move || s.severity(&id, res)).await?))
}

async fn hourly(State(s): Svc, Path((id, cell)): Path<(String, String)>) -> ApiResult<impl IntoResponse> {
    let cell: CellId = cell
        .parse()
        .map_err(|_| Error::invalid("cell", format!("{cell:?} is not a cell id")))?;
    Ok(Json(blocking(move || s.hourly(&id, cell)).await?))
}

#[derive(Deserialize)]
struct CompareRequest {
    job_ids: Vec<String>,
    #[serde(default)]
    name: String,
}

async fn compare(State(s): Svc, body: Bytes) -> ApiResult<impl IntoResponse> {
    let req: CompareRequest = parse_body(&body)?;
    Ok(Json(blocking(move || s.compare(&req.job_ids, &req.name)).await?))
}
