//! Collection loops: probing endpoints from this node, and pulling samples
//! from remote agents.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use futures::future::join_all;
use qosrank::qos::probe::{probe_once, ProbeEndpoint, ProbeError, ProbeSettings};
use qosrank::qos::{parse_samples, QosSample};
use reqwest::Client;
use thiserror::Error;
use tokio::time::MissedTickBehavior;

use crate::config::AgentSource;
use crate::state::AppState;

#[derive(Debug, Error)]
pub enum PullError {
    #[error("{url}: {message}")]
    Request { url: String, message: String },
    #[error("{url}: status {status}")]
    Status { url: String, status: u16 },
    #[error("{url} line {line}: {message}")]
    Row { url: String, line: u64, message: String },
}

pub fn load_endpoints(path: &Path) -> Result<Vec<ProbeEndpoint>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let endpoints: Vec<ProbeEndpoint> =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    for (i, e) in endpoints.iter().enumerate() {
        e.validate().map_err(|err| format!("{} endpoint {i}: {err}", path.display()))?;
    }
    Ok(endpoints)
}

#[derive(Debug, Default)]
pub struct ProbeRound {
    pub samples: Vec<QosSample>,
    pub failures: Vec<(ProbeEndpoint, ProbeError)>,
}

/// Probes every endpoint once. Distinct endpoints run concurrently; entries
/// sharing a probe URL run one after another so their throughput
/// measurements do not compete.
pub async fn probe_round(
    client: &Client,
    endpoints: &[ProbeEndpoint],
    client_location: &str,
    settings: &ProbeSettings,
) -> ProbeRound {
    let mut groups: BTreeMap<&str, Vec<&ProbeEndpoint>> = BTreeMap::new();
    for e in endpoints {
        groups.entry(e.probe_url.as_str()).or_default().push(e);
    }
    let runs = groups.into_values().map(|group| async move {
        let mut out = Vec::with_capacity(group.len());
        for e in group {
            out.push((e, probe_once(client, e, client_location, settings).await));
        }
        out
    });

    let mut round = ProbeRound::default();
    for (endpoint, result) in join_all(runs).await.into_iter().flatten() {
        match result {
            Ok(s) => round.samples.push(s),
            Err(e) => round.failures.push((endpoint.clone(), e)),
        }
    }
    round
}

/// Probes on a fixed schedule until the task is dropped.
pub async fn run_probes(
    state: Arc<AppState>,
    endpoints: Vec<ProbeEndpoint>,
    client_location: String,
    settings: ProbeSettings,
    interval: Duration,
) {
    let client = Client::new();
    let mut ticker = tokio::time::interval(interval);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
    loop {
        ticker.tick().await;
        let round = probe_round(&client, &endpoints, &client_location, &settings).await;
        for (endpoint, e) in &round.failures {
            tracing::warn!(provider = %endpoint.provider, location = %endpoint.datacenter_location, "probe failed: {e}");
        }
        match state.ingest(&round.samples) {
            Ok(report) => tracing::info!(inserted = report.inserted, "probe round done"),
            Err(e) => tracing::error!("cannot persist samples: {e}"),
        }
    }
}

/// Fetches an agent's samples taken at or after `since`.
pub async fn pull_once(client: &Client, agent: &AgentSource, since: i64) -> Result<Vec<QosSample>, PullError> {
    let url = format!("{}/export?since={since}", agent.url.trim_end_matches('/'));
    let failed = |e: reqwest::Error| PullError::Request {
        url: url.clone(),
        message: e.to_string(),
    };
    let resp = client.get(&url).bearer_auth(&agent.token).send().await.map_err(failed)?;
    if !resp.status().is_success() {
        return Err(PullError::Status {
            url,
            status: resp.status().as_u16(),
        });
    }
    let body = resp.text().await.map_err(failed)?;
    let parsed = parse_samples(&body);
    if let Some(e) = parsed.errors.into_iter().next() {
        return Err(PullError::Row {
            url,
            line: e.line,
            message: e.message,
        });
    }
    Ok(parsed.samples)
}

/// Pulls from every agent on a fixed schedule until the task is dropped.
/// Each agent is asked only for samples at or after the newest one already
/// received from it; the overlap is dropped as duplicates on merge.
pub async fn run_pulls(state: Arc<AppState>, agents: Vec<AgentSource>, interval: Duration) {
    let client = Client::new();
    let mut since = vec![0i64; agents.len()];
    let mut ticker = tokio::time::interval(interval);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Delay);
    loop {
        ticker.tick().await;
        let pulls = agents.iter().zip(&since).map(|(a, &s)| pull_once(&client, a, s));
        let results = join_all(pulls).await;
        for ((agent, newest), result) in agents.iter().zip(&mut since).zip(results) {
            match result {
                Ok(samples) => {
                    if let Some(max) = samples.iter().map(|s| s.timestamp).max() {
                        *newest = (*newest).max(max);
                    }
                    match state.ingest(&samples) {
                        Ok(r) => tracing::info!(agent = %agent.url, inserted = r.inserted, "pulled"),
                        Err(e) => tracing::error!("cannot persist samples: {e}"),
                    }
                }
                Err(e) => tracing::warn!("pull failed: {e}"),
            }
        }
    }
}
