//! HTTP front end for [`ApiContext`].
//!
//! Handlers parse the raw query string, run the matching [`ApiContext`]
//! method on the blocking pool and write [`to_json`] of whatever it
//! returns. There are no write routes.

use std::io;
use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::extract::{Path as UrlPath, RawQuery, State};
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use councils_core::api::{to_json, ApiContext, ApiError, Params};
use serde::Serialize;
use tokio::net::TcpListener;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone)]
struct AppState {
    ctx: Arc<ApiContext>,
    static_dir: Option<Arc<PathBuf>>,
}

/// Builds the routes. When `static_dir` is set, paths outside `/api` are
/// served from it, with `index.html` standing in for extensionless paths so
/// client-side routes work.
pub fn router(ctx: Arc<ApiContext>, static_dir: Option<PathBuf>) -> Router {
    let state = AppState { ctx, static_dir: static_dir.map(Arc::new) };
    Router::new()
        .route("/api/instances", get(instances))
        .route("/api/events", get(events))
        .route("/api/events/{id}", get(event))
        .route("/api/events/{id}/transcript", get(transcript))
        .route("/api/events/{id}/minutes", get(minutes))
        .route("/api/search", get(search))
        .route("/api/ngrams", get(ngrams))
        .fallback(fallback)
        .with_state(state)
}

pub async fn bind(addr: SocketAddr) -> Result<TcpListener, ServeError> {
    TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr, source })
}

/// Serves `app` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    app: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

fn json(status: StatusCode, body: Vec<u8>) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(e: ApiError) -> Response {
    let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    json(status, to_json(&e.body()))
}

async fn call<T, F>(ctx: Arc<ApiContext>, f: F) -> Response
where
    T: Serialize,
    F: FnOnce(&ApiContext) -> Result<T, ApiError> + Send + 'static,
{
    let result = tokio::task::spawn_blocking(move || f(&ctx).map(|v| to_json(&v))).await;
    match result {
        Ok(Ok(body)) => json(StatusCode::OK, body),
        Ok(Err(e)) => error(e),
        Err(join) => {
            tracing::error!(error = %join, "handler panicked");
            error(ApiError::Internal("internal error".into()))
        }
    }
}

fn params(query: Option<String>) -> Params {
    Params::parse(query.as_deref().unwrap_or(""))
}

async fn instances(State(s): State<AppState>) -> Response {
    call(s.ctx, |c| c.instances()).await
}

async fn events(State(s): State<AppState>, RawQuery(q): RawQuery) -> Response {
    let p = params(q);
    call(s.ctx, move |c| c.events(&p)).await
}

async fn event(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    call(s.ctx, move |c| c.event_card(&id)).await
}

async fn transcript(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    call(s.ctx, move |c| c.transcript(&id)).await
}

async fn minutes(State(s): State<AppState>, UrlPath(id): UrlPath<String>) -> Response {
    call(s.ctx, move |c| c.minutes(&id)).await
}

async fn search(State(s): State<AppState>, RawQuery(q): RawQuery) -> Response {
    let p = params(q);
    call(s.ctx, move |c| c.search(&p)).await
}

async fn ngrams(State(s): State<AppState>, RawQuery(q): RawQuery) -> Response {
    let p = params(q);
    call(s.ctx, move |c| c.ngrams(&p)).await
}

async fn fallback(State(s): State<AppState>, method: Method, uri: Uri) -> Response {
    let path = uri.path();
    let not_found = || error(ApiError::NotFound(format!("no route for {path}")));
    if path == "/api" || path.starts_with("/api/") {
        return not_found();
    }
    let Some(dir) = s.static_dir else {
        return not_found();
    };
    if method != Method::GET && method != Method::HEAD {
        return StatusCode::METHOD_NOT_ALLOWED.into_response();
    }
    match static_file(&dir, path).await {
        Some((bytes, mime)) => ([(header::CONTENT_TYPE, mime)], bytes).into_response(),
        None => not_found(),
    }
}

async fn static_file(dir: &Path, path: &str) -> Option<(Vec<u8>, &'static str)> {
    let relative = Path::new(path.trim_start_matches('/'));
    if !relative.components().all(|c| matches!(c, Component::Normal(_))) {
        return None;
    }
    let mut file = dir.join(relative);
    if path.ends_with('/') || relative.as_os_str().is_empty() {
        file = file.join("index.html");
    } else if !tokio::fs::metadata(&file).await.is_ok_and(|m| m.is_file()) {
        if relative.extension().is_some() {
            return None;
        }
        file = dir.join("index.html");
    }
    let bytes = tokio::fs::read(&file).await.ok()?;
    Some((bytes, mime_type(&file)))
}

fn mime_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
        "html" => "text/html; charset=utf-8",
        "js" | "mjs" => "text/javascript; charset=utf-8",
        "css" => "text/css; charset=utf-8",
        "json" => "application/json",
        "svg" => "image/svg+xml",
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "ico" => "image/x-icon",
        "woff2" => "font/woff2",
        "txt" => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}
