use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServiceKind {
    Compute,
    Storage,
}

impl ServiceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ServiceKind::Compute => "compute",
            ServiceKind::Storage => "storage",
        }
    }
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ServiceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "compute" => Ok(ServiceKind::Compute),
            "storage" => Ok(ServiceKind::Storage),
            other => Err(format!("unknown service kind `{other}`")),
        }
    }
}

/// What a measurement is about: a datacenter service seen from a client.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QosKey {
    pub provider: String,
    pub datacenter_location: String,
    pub service_kind: ServiceKind,
    pub client_location: String,
}

impl QosKey {
    pub fn new(
        provider: impl Into<String>,
        datacenter_location: impl Into<String>,
        service_kind: ServiceKind,
        client_location: impl Into<String>,
    ) -> Self {
        Self {
            provider: provider.into(),
            datacenter_location: datacenter_location.into(),
            service_kind,
            client_location: client_location.into(),
        }
    }
}

impl fmt::Display for QosKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{} from {}",
            self.provider, self.datacenter_location, self.service_kind, self.client_location
        )
    }
}

/// One probe result. Latency in milliseconds, throughput in Mbit/s,
/// timestamp in UTC seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosSample {
    #[serde(flatten)]
    pub key: QosKey,
    pub timestamp: i64,
    pub latency_ms: f64,
    pub download_mbps: f64,
    pub upload_mbps: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("{0} must be positive and finite, got {1}")]
    NonPositive(&'static str, f64),
    #[error("{0} must not be empty")]
    Empty(&'static str),
}

impl QosSample {
    pub fn validate(&self) -> Result<(), SampleError> {
        for (name, value) in [
            ("provider", &self.key.provider),
            ("datacenter_location", &self.key.datacenter_location),
            ("client_location", &self.key.client_location),
        ] {
            if value.trim().is_empty() {
                return Err(SampleError::Empty(name));
            }
        }
        for (name, value) in [
            ("latency_ms", self.latency_ms),
            ("download_mbps", self.download_mbps),
            ("upload_mbps", self.upload_mbps),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(SampleError::NonPositive(name, value));
            }
        }
        Ok(())
    }
}

/// Mean measurements over every stored sample of one key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QosAverage {
    #[serde(flatten)]
    pub key: QosKey,
    pub mean_latency_ms: f64,
    pub mean_download_mbps: f64,
    pub mean_upload_mbps: f64,
    pub sample_count: u64,
}
