//! Loopback HTTP endpoint with a fixed per-request delay and a paced
//! transfer rate in both directions.

use std::net::SocketAddr;
use std::time::Duration;

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::routing::{get, post};
use axum::serve::ListenerExt;
use axum::Router;
use futures::StreamExt;
use tokio::net::TcpListener;
use tokio::time::{sleep, sleep_until, Instant};

#[derive(Debug, Clone, Copy)]
pub struct Shaping {
    pub delay: Duration,
    pub rate_mbps: f64,
    pub object_bytes: usize,
}

const CHUNK: usize = 16 * 1024;

fn due(start: Instant, bytes: usize, rate_mbps: f64) -> Instant {
    start + Duration::from_secs_f64(bytes as f64 * 8.0 / (rate_mbps * 1e6))
}

async fn head_object(State(s): State<Shaping>) -> [(&'static str, String); 1] {
    sleep(s.delay).await;
    [("content-length", s.object_bytes.to_string())]
}

async fn get_object(State(s): State<Shaping>) -> Body {
    sleep(s.delay).await;
    let start = Instant::now();
    // Each chunk is released when the configured rate would have finished it.
    let stream = futures::stream::unfold(0usize, move |sent| async move {
        if sent >= s.object_bytes {
            return None;
        }
        let n = CHUNK.min(s.object_bytes - sent);
        sleep_until(due(start, sent + n, s.rate_mbps)).await;
        Some((Ok::<_, std::io::Error>(Bytes::from(vec![7u8; n])), sent + n))
    });
    Body::from_stream(stream)
}

async fn upload(State(s): State<Shaping>, body: Body) -> String {
    sleep(s.delay).await;
    let start = Instant::now();
    let mut received = 0usize;
    let mut stream = body.into_data_stream();
    while let Some(chunk) = stream.next().await {
        let Ok(chunk) = chunk else { break };
        received += chunk.len();
        sleep_until(due(start, received, s.rate_mbps)).await;
    }
    received.to_string()
}

/// Serves `/object` (GET and HEAD) and `/upload` (POST) on an ephemeral
/// loopback port until the runtime shuts down.
pub async fn spawn(shaping: Shaping) -> SocketAddr {
    let app = Router::new()
        .route("/object", get(get_object).head(head_object))
        .route("/upload", post(upload))
        .layer(axum::extract::DefaultBodyLimit::disable())
        .with_state(shaping);
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let listener = listener.tap_io(|tcp| {
        let _ = tcp.set_nodelay(true);
    });
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}

/// Accepts connections and never answers.
pub async fn spawn_silent() -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        let mut held = Vec::new();
        while let Ok((socket, _)) = listener.accept().await {
            held.push(socket);
        }
    });
    addr
}

/// An address with nothing listening on it.
pub async fn closed_port() -> SocketAddr {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    listener.local_addr().unwrap()
}
