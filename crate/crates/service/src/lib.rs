//! HTTP front end for qosrank: ranking and weight derivation, catalog and QoS
//! imports, and the master/agent sample collection loops.

pub mod agent;
pub mod api;
pub mod config;
pub mod response;
pub mod state;

use std::sync::Arc;

use qosrank::qos::probe::ProbeSettings;
use thiserror::Error;

pub use api::router;
pub use config::Config;
pub use response::{rank_response, Page, RankResponse};
pub use state::AppState;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    State(#[from] state::StateError),
    #[error("{0}")]
    Endpoints(String),
    #[error("cannot listen on {addr}: {source}")]
    Bind {
        addr: std::net::SocketAddr,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Builds the state described by `config`, loading any persisted data.
pub fn build_state(config: &Config) -> Result<AppState, ServeError> {
    let state = AppState::new(config.admin_token.clone(), config.agent_token.clone());
    Ok(match &config.data_dir {
        Some(dir) => state.with_data_dir(dir)?,
        None => state,
    })
}

/// Runs the service and any configured collection loops until Ctrl-C.
pub async fn serve(config: Config) -> Result<(), ServeError> {
    let state = Arc::new(build_state(&config)?);

    if let Some(probe) = &config.probe {
        let endpoints = agent::load_endpoints(&probe.endpoints).map_err(ServeError::Endpoints)?;
        let settings = ProbeSettings {
            repetitions: probe.repetitions,
            timeout: probe.timeout,
        };
        tokio::spawn(agent::run_probes(
            state.clone(),
            endpoints,
            probe.client_location.clone(),
            settings,
            probe.interval,
        ));
    }
    if !config.agents.is_empty() {
        tokio::spawn(agent::run_pulls(state.clone(), config.agents.clone(), config.pull_interval));
    }

    let listener = tokio::net::TcpListener::bind(config.listen)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.listen,
            source,
        })?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
