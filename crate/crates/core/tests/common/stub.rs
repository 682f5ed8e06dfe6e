//! A local chat-completion server with scripted faults.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub type Answerer = Arc<dyn Fn(&str) -> String + Send + Sync>;

/// Fault script. Questions starting with `FATAL` get a 400 and questions
/// starting with `MALFORMED` get a 200 without choices.
#[derive(Clone)]
pub struct StubConfig {
    /// Fail an attempt with 503 when hash(question, attempt) % fail_mod == 0.
    pub fail_mod: u64,
    /// Attempts at or past this index never fail.
    pub fail_attempts: u32,
    pub delay: Duration,
    pub answer: Answerer,
}

impl Default for StubConfig {
    fn default() -> Self {
        StubConfig {
            fail_mod: 0,
            fail_attempts: 3,
            delay: Duration::ZERO,
            answer: Arc::new(|q| format!("a:{q}")),
        }
    }
}

#[derive(Default)]
pub struct StubStats {
    attempts: Mutex<HashMap<String, u32>>,
    pub requests: AtomicUsize,
    pub injected: AtomicUsize,
    pub in_flight: AtomicUsize,
    pub max_in_flight: AtomicUsize,
    pub auth: Mutex<Vec<String>>,
    pub arrivals: Mutex<Vec<Instant>>,
}

struct Shared {
    cfg: StubConfig,
    stats: Arc<StubStats>,
}

pub struct Stub {
    pub url: String,
    pub stats: Arc<StubStats>,
    stop: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl Stub {
    pub fn start(cfg: StubConfig) -> Stub {
        let stats = Arc::new(StubStats::default());
        let shared = Arc::new(Shared { cfg, stats: stats.clone() });
        let (addr_tx, addr_rx) = mpsc::channel();
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(4)
                .enable_all()
                .build()
                .unwrap();
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                addr_tx.send(listener.local_addr().unwrap()).unwrap();
                let app = Router::new().route("/v1/chat/completions", post(handle)).with_state(shared);
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = stop_rx.await;
                    })
                    .await
                    .unwrap();
            });
        });
        let addr = addr_rx.recv().unwrap();
        Stub {
            url: format!("http://{addr}/v1/chat/completions"),
            stats,
            stop: Some(stop_tx),
            thread: Some(thread),
        }
    }
}

impl Drop for Stub {
    fn drop(&mut self) {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

fn fails(question: &str, attempt: u32, fail_mod: u64) -> bool {
    if fail_mod == 0 {
        return false;
    }
    let h = Sha256::digest(format!("{question}\u{0}{attempt}").as_bytes());
    u64::from_le_bytes(h[..8].try_into().unwrap()) % fail_mod == 0
}

async fn handle(State(s): State<Arc<Shared>>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
    let st = &s.stats;
    st.requests.fetch_add(1, Ordering::SeqCst);
    st.arrivals.lock().unwrap().push(Instant::now());
    let auth = headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default()
        .to_string();
    st.auth.lock().unwrap().push(auth);
    let now = st.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    st.max_in_flight.fetch_max(now, Ordering::SeqCst);
    if !s.cfg.delay.is_zero() {
        tokio::time::sleep(s.cfg.delay).await;
    }
    let question = body["messages"][1]["content"][1]["text"].as_str().unwrap_or_default().to_string();
    let attempt = {
        let mut m = st.attempts.lock().unwrap();
        let n = m.entry(question.clone()).or_insert(0);
        *n += 1;
        *n - 1
    };
    let resp = if question.starts_with("FATAL") {
        (StatusCode::BAD_REQUEST, "bad request").into_response()
    } else if question.starts_with("MALFORMED") {
        Json(json!({"id": "x", "object": "chat.completion"})).into_response()
    } else if attempt < s.cfg.fail_attempts && fails(&question, attempt, s.cfg.fail_mod) {
        st.injected.fetch_add(1, Ordering::SeqCst);
        (StatusCode::SERVICE_UNAVAILABLE, "try later").into_response()
    } else {
        let answer = (s.cfg.answer)(&question);
        Json(json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": answer}}]})).into_response()
    };
    st.in_flight.fetch_sub(1, Ordering::SeqCst);
    resp
}
