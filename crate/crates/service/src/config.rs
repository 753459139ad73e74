//! Service configuration: one TOML document, with environment overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Deserializer};
use thiserror::Error;

pub const DEFAULT_INTERVAL: Duration = Duration::from_secs(2 * 60 * 60);

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{var}: {message}")]
    Env { var: String, message: String },
}

fn duration<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
    let raw = String::deserialize(d)?;
    humantime::parse_duration(&raw).map_err(serde::de::Error::custom)
}

fn default_listen() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_interval() -> Duration {
    DEFAULT_INTERVAL
}

fn default_repetitions() -> usize {
    5
}

fn default_timeout() -> Duration {
    Duration::from_secs(30)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_listen")]
    pub listen: SocketAddr,
    /// Where the catalog and samples are persisted; nothing is kept when unset.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    /// Bearer token required by import routes. Imports are refused when unset.
    #[serde(default)]
    pub admin_token: Option<String>,
    /// Bearer token this node requires on its export route.
    #[serde(default)]
    pub agent_token: Option<String>,
    /// Agents this node pulls samples from.
    #[serde(default)]
    pub agents: Vec<AgentSource>,
    #[serde(default = "default_interval", deserialize_with = "duration")]
    pub pull_interval: Duration,
    /// Probing done by this node itself, if any.
    #[serde(default)]
    pub probe: Option<ProbeConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSource {
    /// Base URL; samples are fetched from `{url}/export`.
    pub url: String,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub client_location: String,
    /// JSON list of endpoints to probe.
    pub endpoints: PathBuf,
    #[serde(default = "default_interval", deserialize_with = "duration")]
    pub interval: Duration,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_timeout", deserialize_with = "duration")]
    pub timeout: Duration,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            listen: default_listen(),
            data_dir: None,
            admin_token: None,
            agent_token: None,
            agents: Vec::new(),
            pull_interval: DEFAULT_INTERVAL,
            probe: None,
        }
    }
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_owned(),
            message: e.message().to_owned(),
        })
    }

    /// Reads `path` and applies overrides from the process environment.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut config = Self::parse(&text, path)?;
        config.apply_env(|name| std::env::var(name).ok())?;
        Ok(config)
    }

    /// Applies `QOSRANK_*` overrides looked up through `var`.
    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let bad = |name: &str, message: String| ConfigError::Env {
            var: name.to_owned(),
            message,
        };
        let interval = |name: &str, raw: String| {
            humantime::parse_duration(&raw).map_err(|e| bad(name, e.to_string()))
        };

        if let Some(v) = var("QOSRANK_LISTEN") {
            self.listen = v.parse().map_err(|e: std::net::AddrParseError| bad("QOSRANK_LISTEN", e.to_string()))?;
        }
        if let Some(v) = var("QOSRANK_DATA_DIR") {
            self.data_dir = Some(v.into());
        }
        if let Some(v) = var("QOSRANK_ADMIN_TOKEN") {
            self.admin_token = Some(v);
        }
        if let Some(v) = var("QOSRANK_AGENT_TOKEN") {
            self.agent_token = Some(v);
        }
        if let Some(v) = var("QOSRANK_PULL_INTERVAL") {
            self.pull_interval = interval("QOSRANK_PULL_INTERVAL", v)?;
        }

        let client = var("QOSRANK_PROBE_CLIENT_LOCATION");
        let endpoints = var("QOSRANK_PROBE_ENDPOINTS");
        if self.probe.is_none() {
            if let (Some(client), Some(endpoints)) = (&client, &endpoints) {
                self.probe = Some(ProbeConfig {
                    client_location: client.clone(),
                    endpoints: endpoints.into(),
                    interval: DEFAULT_INTERVAL,
                    repetitions: default_repetitions(),
                    timeout: default_timeout(),
                });
            }
        }
        if let Some(probe) = &mut self.probe {
            if let Some(v) = client {
                probe.client_location = v;
            }
            if let Some(v) = endpoints {
                probe.endpoints = v.into();
            }
            if let Some(v) = var("QOSRANK_PROBE_INTERVAL") {
                probe.interval = interval("QOSRANK_PROBE_INTERVAL", v)?;
            }
        }
        Ok(())
    }
}
