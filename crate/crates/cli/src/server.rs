//! HTTP front end for the JSON API, plus optional static files.

use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use oxflow_core::apps::Service;
use tokio::net::TcpListener;

#[derive(Clone)]
struct AppState {
    service: Arc<Service>,
    static_dir: Option<Arc<PathBuf>>,
}

pub fn router(service: Arc<Service>, static_dir: Option<PathBuf>) -> Router {
    Router::new().fallback(dispatch).with_state(AppState {
        service,
        static_dir: static_dir.map(Arc::new),
    })
}

fn content_type(p: &Path) -> &'static str {
    match p.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") => "text/javascript",
        Some("css") => "text/css",
        Some("wasm") => "application/wasm",
        Some("json") => "application/json",
        _ => "application/octet-stream",
    }
}

fn static_file(dir: &Path, path: &str) -> Option<Response> {
    let rel = if path == "/" { "index.html" } else { path.trim_start_matches('/') };
    let rel = Path::new(rel);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let full = dir.join(rel);
    let bytes = std::fs::read(&full).ok()?;
    Some(([(header::CONTENT_TYPE, content_type(&full))], bytes).into_response())
}

async fn dispatch(State(st): State<AppState>, method: Method, uri: Uri, body: Bytes) -> Response {
    let path = uri.path();
    let api = path == "/programs" || path.starts_with("/program/") || path == "/slice" || path == "/ifc";
    if method == Method::GET && !api {
        if let Some(r) = st.static_dir.as_deref().and_then(|d| static_file(d, path)) {
            return r;
        }
    }
    let r = st.service.handle(method.as_str(), path, &String::from_utf8_lossy(&body));
    let status = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, [(header::CONTENT_TYPE, "application/json")], r.body).into_response()
}

/// Bind `addr` and serve until the process ends.
pub async fn serve(service: Arc<Service>, addr: SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service, static_dir)).await
}
