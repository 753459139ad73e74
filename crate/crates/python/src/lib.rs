//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists with the same shape as the JSON API.

use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyString;
use qosrank::ahp::{convergence_gap, ComparisonMatrix, Judgment};
use qosrank::catalog::{CatalogStore, OfferKind};
use qosrank::qos::{parse_samples, write_samples, QosAverage, QosSample};
use qosrank::ranking::{rank, RankError, RankRequest, ScoredCombination, SortOrder};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn invalid(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(invalid)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Accepts either a JSON string or a JSON-compatible Python value.
fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = if obj.is_instance_of::<PyString>() {
        obj.extract()?
    } else {
        obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&text).map_err(invalid)
}

fn rank_error(e: RankError) -> PyErr {
    match e {
        RankError::Invalid(fields) => invalid(
            fields
                .iter()
                .map(|f| format!("{}: {}", f.field, f.message))
                .collect::<Vec<_>>()
                .join("; "),
        ),
    }
}

/// An immutable offer catalog.
#[pyclass(frozen, module = "qosrank")]
struct Catalog {
    inner: Arc<qosrank::Catalog>,
}

#[pymethods]
impl Catalog {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let store = CatalogStore::new();
        store.import_json(text).map_err(invalid)?;
        Ok(Self {
            inner: store.snapshot().expect("just imported"),
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| pyo3::exceptions::PyOSError::new_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    #[getter]
    fn version(&self) -> u64 {
        self.inner.version
    }

    fn __len__(&self) -> usize {
        self.inner.offer_count()
    }

    /// Offers of one kind ("compute", "storage" or "network").
    fn offers<'py>(&self, py: Python<'py>, kind: &str) -> PyResult<Bound<'py, PyAny>> {
        match kind.parse::<OfferKind>().map_err(invalid)? {
            OfferKind::Compute => to_py(py, &self.inner.compute),
            OfferKind::Storage => to_py(py, &self.inner.storage),
            OfferKind::Network => to_py(py, &self.inner.network),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "Catalog(compute={}, storage={}, network={})",
            self.inner.compute.len(),
            self.inner.storage.len(),
            self.inner.network.len()
        )
    }
}

/// Merged QoS samples.
#[pyclass(module = "qosrank")]
#[derive(Default)]
struct QosStore {
    inner: qosrank::QosStore,
}

#[pymethods]
impl QosStore {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    /// Merges a sample CSV document. Returns counts and the rejected lines.
    fn merge_csv<'py>(&mut self, py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
        let parsed = parse_samples(text);
        let report = self.inner.merge(&parsed.samples);
        let rejected: Vec<(u64, String)> = parsed.errors.into_iter().map(|e| (e.line, e.message)).collect();
        to_py(
            py,
            &serde_json::json!({
                "inserted": report.inserted,
                "duplicates": report.duplicates,
                "rejected": rejected,
            }),
        )
    }

    /// Merges samples given as dicts; returns the number inserted.
    fn merge(&mut self, samples: &Bound<'_, PyAny>) -> PyResult<usize> {
        let samples: Vec<QosSample> = from_py(samples)?;
        let report = self.inner.merge(&samples);
        if let Some((i, e)) = report.rejected.first() {
            return Err(invalid(format!("sample {i}: {e}")));
        }
        Ok(report.inserted)
    }

    #[pyo3(signature = (client_location=None))]
    fn averages<'py>(&self, py: Python<'py>, client_location: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
        let all: Vec<QosAverage> = self
            .inner
            .averages()
            .into_iter()
            .filter(|a| client_location.is_none_or(|c| a.key.client_location == c))
            .collect();
        to_py(py, &all)
    }

    #[pyo3(signature = (since=0))]
    fn export_csv(&self, since: i64) -> String {
        write_samples(&self.inner.samples_since(since))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Criterion weights from pairwise judgments, given as `(a, b, value)`
/// tuples or dicts. `value` says how much more `a` matters than `b` and may
/// be written as a fraction such as "1/3".
#[pyfunction]
fn weights<'py>(py: Python<'py>, judgments: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let judgments: Vec<Judgment> = from_py(judgments)?;
    let m = ComparisonMatrix::from_judgments(&judgments).map_err(invalid)?;
    to_py(
        py,
        &serde_json::json!({
            "criteria": m.criteria(),
            "weights": m.weights().weights(),
            "convergence_gap": convergence_gap(&m),
        }),
    )
}

fn ranked(
    request: &RankRequest,
    catalog: &qosrank::Catalog,
    averages: &[QosAverage],
    order: SortOrder,
    limit: Option<usize>,
    offset: usize,
) -> Result<Vec<ScoredCombination>, RankError> {
    let all = rank(request, catalog, averages, order)?.solutions;
    Ok(all.into_iter().skip(offset).take(limit.unwrap_or(usize::MAX)).collect())
}

/// Ranks offer combinations for `request` (a dict or JSON string).
#[pyfunction]
#[pyo3(signature = (request, catalog, qos, order="ratio", limit=None, offset=0))]
fn rank_offers<'py>(
    py: Python<'py>,
    request: &Bound<'py, PyAny>,
    catalog: &Catalog,
    qos: &QosStore,
    order: &str,
    limit: Option<usize>,
    offset: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let request: RankRequest = from_py(request)?;
    let order: SortOrder = order.parse().map_err(invalid)?;
    let averages = qos.inner.averages();
    let catalog = catalog.inner.clone();
    let results = py
        .detach(|| ranked(&request, &catalog, &averages, order, limit, offset))
        .map_err(rank_error)?;
    to_py(py, &results)
}

#[pymodule]
fn _native(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Catalog>()?;
    m.add_class::<QosStore>()?;
    m.add_function(wrap_pyfunction!(weights, m)?)?;
    m.add_function(wrap_pyfunction!(rank_offers, m)?)?;
    Ok(())
}
