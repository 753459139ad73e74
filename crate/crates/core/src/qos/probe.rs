//! Active probing of one datacenter endpoint from a client vantage point.

use std::time::{Duration, Instant};

use reqwest::{Client, Url};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sample::{QosKey, QosSample, ServiceKind};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Where and how to probe one service at one datacenter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEndpoint {
    pub provider: String,
    pub datacenter_location: String,
    pub service_kind: ServiceKind,
    /// URL of a test object of `test_object_bytes` bytes.
    pub probe_url: String,
    /// URL accepting a POSTed payload.
    pub upload_url: String,
    pub test_object_bytes: u64,
}

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("invalid endpoint: {0}")]
    InvalidEndpoint(String),
    #[error("request to {url} timed out")]
    Timeout { url: String },
    #[error("{url} unreachable: {message}")]
    Unreachable { url: String, message: String },
    #[error("malformed response from {url}: {message}")]
    Malformed { url: String, message: String },
}

impl ProbeEndpoint {
    pub fn validate(&self) -> Result<(Url, Url), ProbeError> {
        let parse = |name: &str, raw: &str| {
            let url = Url::parse(raw)
                .map_err(|e| ProbeError::InvalidEndpoint(format!("{name} `{raw}`: {e}")))?;
            match url.scheme() {
                "http" | "https" => Ok(url),
                other => Err(ProbeError::InvalidEndpoint(format!(
                    "{name} `{raw}`: unsupported scheme `{other}`"
                ))),
            }
        };
        if self.test_object_bytes == 0 {
            return Err(ProbeError::InvalidEndpoint(
                "test_object_bytes must be positive".into(),
            ));
        }
        Ok((
            parse("probe_url", &self.probe_url)?,
            parse("upload_url", &self.upload_url)?,
        ))
    }
}

#[derive(Debug, Clone)]
pub struct ProbeSettings {
    pub repetitions: usize,
    pub timeout: Duration,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            repetitions: 5,
            timeout: DEFAULT_TIMEOUT,
        }
    }
}

fn classify(url: &Url, e: reqwest::Error) -> ProbeError {
    let url = url.to_string();
    if e.is_timeout() {
        ProbeError::Timeout { url }
    } else if e.is_connect() {
        ProbeError::Unreachable {
            url,
            message: e.to_string(),
        }
    } else {
        ProbeError::Malformed {
            url,
            message: e.to_string(),
        }
    }
}

fn check_status(url: &Url, status: reqwest::StatusCode) -> Result<(), ProbeError> {
    if status.is_success() {
        Ok(())
    } else {
        Err(ProbeError::Malformed {
            url: url.to_string(),
            message: format!("status {status}"),
        })
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 0 {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    }
}

fn mbps(bytes: u64, seconds: f64) -> f64 {
    bytes as f64 * 8.0 / seconds / 1e6
}

/// Takes one sample: median round trip of `repetitions` HEAD requests,
/// then a timed download of the test object and a timed upload of an equally
/// sized payload. Any failure discards the whole sample.
pub async fn probe_once(
    client: &Client,
    endpoint: &ProbeEndpoint,
    client_location: &str,
    settings: &ProbeSettings,
) -> Result<QosSample, ProbeError> {
    let (probe_url, upload_url) = endpoint.validate()?;
    if settings.repetitions == 0 {
        return Err(ProbeError::InvalidEndpoint(
            "repetitions must be at least 1".into(),
        ));
    }

    let mut round_trips = Vec::with_capacity(settings.repetitions);
    for _ in 0..settings.repetitions {
        let start = Instant::now();
        let resp = client
            .head(probe_url.clone())
            .timeout(settings.timeout)
            .send()
            .await
            .map_err(|e| classify(&probe_url, e))?;
        check_status(&probe_url, resp.status())?;
        round_trips.push(start.elapsed().as_secs_f64());
    }
    let rtt = median(round_trips);

    // Download time runs from the response head to the last body byte.
    let resp = client
        .get(probe_url.clone())
        .timeout(settings.timeout)
        .send()
        .await
        .map_err(|e| classify(&probe_url, e))?;
    check_status(&probe_url, resp.status())?;
    let body_start = Instant::now();
    let body = resp.bytes().await.map_err(|e| classify(&probe_url, e))?;
    let download_secs = body_start.elapsed().as_secs_f64();
    if body.len() as u64 != endpoint.test_object_bytes {
        return Err(ProbeError::Malformed {
            url: probe_url.to_string(),
            message: format!(
                "expected {} bytes, received {}",
                endpoint.test_object_bytes,
                body.len()
            ),
        });
    }

    // Upload time is the full exchange less one round trip.
    let payload = vec![0u8; endpoint.test_object_bytes as usize];
    let start = Instant::now();
    let resp = client
        .post(upload_url.clone())
        .timeout(settings.timeout)
        .body(payload)
        .send()
        .await
        .map_err(|e| classify(&upload_url, e))?;
    check_status(&upload_url, resp.status())?;
    resp.bytes().await.map_err(|e| classify(&upload_url, e))?;
    let total = start.elapsed().as_secs_f64();
    let upload_secs = if total > rtt { total - rtt } else { total };

    let sample = QosSample {
        key: QosKey {
            provider: endpoint.provider.clone(),
            datacenter_location: endpoint.datacenter_location.clone(),
            service_kind: endpoint.service_kind,
            client_location: client_location.to_owned(),
        },
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs() as i64),
        latency_ms: rtt * 1e3,
        download_mbps: mbps(endpoint.test_object_bytes, download_secs.max(1e-9)),
        upload_mbps: mbps(endpoint.test_object_bytes, upload_secs.max(1e-9)),
    };
    sample.validate().map_err(|e| ProbeError::Malformed {
        url: probe_url.to_string(),
        message: e.to_string(),
    })?;
    Ok(sample)
}
