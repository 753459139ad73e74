//! Network QoS measurements: samples taken by probe agents, the CSV format
//! they travel in, the merged sample store on the master, and the per-key
//! averages used by ranking.

mod fallback;
#[cfg(feature = "probe")]
pub mod probe;
mod sample;
mod store;
pub mod wire;

pub use fallback::{
    estimate_latency_fallback, estimate_metric, great_circle_km, Estimate, LinearFit,
};
pub use sample::{QosAverage, QosKey, QosSample, SampleError, ServiceKind};
pub use store::{MergeReport, QosStore};
pub use wire::{parse_samples, write_samples, CsvImport, RowError, CSV_HEADER};
