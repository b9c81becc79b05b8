use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Form, Json, Router};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::clock::ServerClock;
use crate::model::{format_field, format_timestamp, Channel, FeedEntry};
use crate::store::{Credential, Store};
use crate::Error;

pub const DEFAULT_RESULTS: usize = 100;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub clock: Arc<dyn ServerClock>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/update", get(update).post(update))
        .route("/channels/{id}/feeds.json", get(feeds))
        .route("/channels/{id}/fields/{file}", get(field_feed))
        .route("/login", post(login))
        .with_state(state)
}

fn text(status: StatusCode, body: impl Into<String>) -> Response {
    (status, [(header::CONTENT_TYPE, "text/plain; charset=utf-8")], body.into()).into_response()
}

fn error_json(status: StatusCode, message: &str) -> Response {
    (status, Json(json!({ "error": message }))).into_response()
}

fn url_pairs(raw: &str) -> Option<Vec<(String, String)>> {
    serde_urlencoded::from_str(raw).ok()
}

async fn update(State(st): State<AppState>, RawQuery(query): RawQuery, body: Bytes) -> Response {
    let mut pairs = match url_pairs(query.as_deref().unwrap_or("")) {
        Some(p) => p,
        None => return text(StatusCode::BAD_REQUEST, "0"),
    };
    if !body.is_empty() {
        match std::str::from_utf8(&body).ok().and_then(url_pairs) {
            Some(p) => pairs.extend(p),
            None => return text(StatusCode::BAD_REQUEST, "0"),
        }
    }
    let now = st.clock.now();
    let store = Arc::clone(&st.store);
    // Appends may fsync, keep them off the async workers.
    let res = tokio::task::spawn_blocking(move || store.handle_update_pairs(&pairs, now)).await;
    match res {
        Ok(Ok(id)) => text(StatusCode::OK, id.to_string()),
        Ok(Err(e)) => {
            log::debug!("update refused: {e}");
            let status = StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            text(status, "0")
        }
        Err(_) => text(StatusCode::INTERNAL_SERVER_ERROR, "0"),
    }
}

#[derive(Debug, Deserialize)]
struct FeedQuery {
    results: Option<String>,
    api_key: Option<String>,
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

/// Channel metadata plus feed rows, values as strings. `only` limits the
/// output to one 1-based field.
pub fn feeds_document(channel: &Channel, entries: &[FeedEntry], only: Option<usize>) -> Value {
    let wanted = |i: usize| only.is_none_or(|k| k == i);
    let mut ch = Map::new();
    ch.insert("id".into(), json!(channel.id));
    ch.insert("name".into(), json!(channel.name));
    for (i, name) in channel.field_names.iter().enumerate() {
        if wanted(i + 1) {
            ch.insert(format!("field{}", i + 1), json!(name));
        }
    }
    let feeds: Vec<Value> = entries
        .iter()
        .map(|e| {
            let mut row = Map::new();
            row.insert("created_at".into(), json!(format_timestamp(e.created_at)));
            row.insert("entry_id".into(), json!(e.entry_id));
            for (i, v) in e.field_values.iter().enumerate() {
                if wanted(i + 1) {
                    row.insert(format!("field{}", i + 1), v.map(format_field).map_or(Value::Null, Value::String));
                }
            }
            Value::Object(row)
        })
        .collect();
    json!({ "channel": ch, "feeds": feeds })
}

fn read_feeds(st: &AppState, id: &str, q: &FeedQuery, headers: &HeaderMap, only: Option<usize>) -> Response {
    let Ok(id) = id.parse::<u64>() else {
        return error_json(StatusCode::NOT_FOUND, "no such channel");
    };
    let results = match q.results.as_deref() {
        None => DEFAULT_RESULTS,
        Some(r) => match r.parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => return error_json(StatusCode::BAD_REQUEST, "results must be a positive integer"),
        },
    };
    let cred = match (q.api_key.as_deref(), bearer(headers)) {
        (Some(k), _) => Credential::ReadKey(k),
        (None, Some(t)) => Credential::Session(t),
        (None, None) => Credential::None,
    };
    match st.store.get_feeds(id, results, cred, st.clock.now()) {
        Ok((ch, entries)) => {
            if let Some(k) = only {
                if k == 0 || k > ch.arity() {
                    return error_json(StatusCode::NOT_FOUND, "no such field");
                }
            }
            Json(feeds_document(&ch, &entries, only)).into_response()
        }
        Err(Error::UnknownChannel(_)) => error_json(StatusCode::NOT_FOUND, "no such channel"),
        Err(Error::Unauthorized) => error_json(StatusCode::UNAUTHORIZED, "unauthorized"),
        Err(Error::InvalidArgument(m)) => error_json(StatusCode::BAD_REQUEST, &m),
        Err(e) => error_json(StatusCode::INTERNAL_SERVER_ERROR, &e.to_string()),
    }
}

async fn feeds(
    State(st): State<AppState>,
    Path(id): Path<String>,
    axum::extract::Query(q): axum::extract::Query<FeedQuery>,
    headers: HeaderMap,
) -> Response {
    read_feeds(&st, &id, &q, &headers, None)
}

async fn field_feed(
    State(st): State<AppState>,
    Path((id, file)): Path<(String, String)>,
    axum::extract::Query(q): axum::extract::Query<FeedQuery>,
    headers: HeaderMap,
) -> Response {
    match file.strip_suffix(".json").and_then(|k| k.parse::<usize>().ok()) {
        Some(k) => read_feeds(&st, &id, &q, &headers, Some(k)),
        None => error_json(StatusCode::NOT_FOUND, "no such field"),
    }
}

#[derive(Debug, Deserialize)]
struct LoginForm {
    username: String,
    password: String,
}

async fn login(State(st): State<AppState>, Form(f): Form<LoginForm>) -> Response {
    let now = st.clock.now();
    let store = Arc::clone(&st.store);
    let res = tokio::task::spawn_blocking(move || store.authenticate(&f.username, &f.password, now)).await;
    match res {
        Ok(Ok(token)) => Json(json!({ "token": token })).into_response(),
        _ => error_json(StatusCode::UNAUTHORIZED, "authentication failed"),
    }
}
