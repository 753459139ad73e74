//! Shared service state. Readers always work on immutable snapshots; writers
//! build a replacement and publish it in one step.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use qosrank::catalog::{CatalogError, CatalogStore};
use qosrank::qos::{parse_samples, write_samples, MergeReport, QosAverage, QosSample, QosStore};
use thiserror::Error;

const CATALOG_FILE: &str = "catalog.json";
const SAMPLES_FILE: &str = "qos.csv";

#[derive(Debug, Error)]
pub enum StateError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Catalog { path: PathBuf, source: CatalogError },
    #[error("{path} line {line}: {message}")]
    Samples {
        path: PathBuf,
        line: u64,
        message: String,
    },
}

/// Merged QoS samples plus a published copy of their averages.
#[derive(Default)]
pub struct QosHub {
    store: Mutex<QosStore>,
    averages: RwLock<Arc<Vec<QosAverage>>>,
}

impl QosHub {
    pub fn new() -> Self {
        Self::default()
    }

    /// Merges a batch and republishes the averages. Merges are serialized.
    pub fn merge(&self, samples: &[QosSample]) -> MergeReport {
        let mut store = self.store.lock().expect("qos store poisoned");
        let report = store.merge(samples);
        if report.inserted > 0 {
            let averages = Arc::new(store.averages());
            *self.averages.write().expect("averages poisoned") = averages;
        }
        report
    }

    pub fn averages(&self) -> Arc<Vec<QosAverage>> {
        self.averages.read().expect("averages poisoned").clone()
    }

    pub fn samples_since(&self, since: i64) -> Vec<QosSample> {
        self.store.lock().expect("qos store poisoned").samples_since(since)
    }

    pub fn all_samples(&self) -> Vec<QosSample> {
        self.store.lock().expect("qos store poisoned").all_samples()
    }

    pub fn len(&self) -> usize {
        self.store.lock().expect("qos store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub struct AppState {
    pub catalog: CatalogStore,
    pub qos: QosHub,
    pub admin_token: Option<String>,
    pub agent_token: Option<String>,
    data_dir: Option<PathBuf>,
    // Keeps file writes from interleaving.
    persist: Mutex<()>,
}

impl AppState {
    pub fn new(admin_token: Option<String>, agent_token: Option<String>) -> Self {
        Self {
            catalog: CatalogStore::new(),
            qos: QosHub::new(),
            admin_token,
            agent_token,
            data_dir: None,
            persist: Mutex::new(()),
        }
    }

    /// Uses `dir` for persistence, loading whatever it already holds.
    pub fn with_data_dir(mut self, dir: &Path) -> Result<Self, StateError> {
        std::fs::create_dir_all(dir).map_err(|source| StateError::Io {
            path: dir.to_owned(),
            source,
        })?;

        let catalog_path = dir.join(CATALOG_FILE);
        if catalog_path.exists() {
            let text = read(&catalog_path)?;
            self.catalog
                .import_json(&text)
                .map_err(|source| StateError::Catalog {
                    path: catalog_path.clone(),
                    source,
                })?;
        }

        let samples_path = dir.join(SAMPLES_FILE);
        if samples_path.exists() {
            let parsed = parse_samples(&read(&samples_path)?);
            if let Some(e) = parsed.errors.first() {
                return Err(StateError::Samples {
                    path: samples_path,
                    line: e.line,
                    message: e.message.clone(),
                });
            }
            self.qos.merge(&parsed.samples);
        }

        self.data_dir = Some(dir.to_owned());
        Ok(self)
    }

    pub fn save_catalog(&self, text: &str) -> Result<(), StateError> {
        let Some(dir) = &self.data_dir else {
            return Ok(());
        };
        let _guard = self.persist.lock().expect("persist lock poisoned");
        write_atomic(&dir.join(CATALOG_FILE), text)
    }

    pub fn save_samples(&self) -> Result<(), StateError> {
        let Some(dir) = &self.data_dir else {
            return Ok(());
        };
        let _guard = self.persist.lock().expect("persist lock poisoned");
        write_atomic(&dir.join(SAMPLES_FILE), &write_samples(&self.qos.all_samples()))
    }

    /// Merges samples and persists them when anything new arrived.
    pub fn ingest(&self, samples: &[QosSample]) -> Result<MergeReport, StateError> {
        let report = self.qos.merge(samples);
        if report.inserted > 0 {
            self.save_samples()?;
        }
        Ok(report)
    }
}

fn read(path: &Path) -> Result<String, StateError> {
    std::fs::read_to_string(path).map_err(|source| StateError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_atomic(path: &Path, text: &str) -> Result<(), StateError> {
    let tmp = path.with_extension("tmp");
    let io = |source| StateError::Io {
        path: path.to_owned(),
        source,
    };
    std::fs::write(&tmp, text).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}
