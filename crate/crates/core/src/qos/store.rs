use std::collections::BTreeMap;

use super::sample::{QosAverage, QosKey, QosSample, SampleError};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Measurement {
    latency_ms: f64,
    download_mbps: f64,
    upload_mbps: f64,
}

/// Outcome of merging a batch of samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MergeReport {
    pub inserted: usize,
    pub duplicates: usize,
    /// Position in the batch and reason for each rejected sample.
    pub rejected: Vec<(usize, SampleError)>,
}

/// Merged sample set, keyed by measurement key and timestamp.
///
/// A sample whose key and timestamp are already present is a duplicate and
/// is dropped, so merging is idempotent. Iteration order is fixed by key and
/// timestamp, which makes averages independent of merge order.
#[derive(Debug, Clone, Default)]
pub struct QosStore {
    samples: BTreeMap<QosKey, BTreeMap<i64, Measurement>>,
    len: usize,
}

impl QosStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Inserts every valid, previously unseen sample.
    pub fn merge<'a>(&mut self, batch: impl IntoIterator<Item = &'a QosSample>) -> MergeReport {
        let mut report = MergeReport::default();
        for (i, sample) in batch.into_iter().enumerate() {
            if let Err(e) = sample.validate() {
                report.rejected.push((i, e));
                continue;
            }
            let series = self.samples.entry(sample.key.clone()).or_default();
            if series.contains_key(&sample.timestamp) {
                report.duplicates += 1;
                continue;
            }
            series.insert(
                sample.timestamp,
                Measurement {
                    latency_ms: sample.latency_ms,
                    download_mbps: sample.download_mbps,
                    upload_mbps: sample.upload_mbps,
                },
            );
            self.len += 1;
            report.inserted += 1;
        }
        report
    }

    /// Arithmetic mean per key over all stored samples, in key order.
    pub fn averages(&self) -> Vec<QosAverage> {
        self.samples
            .iter()
            .filter(|(_, series)| !series.is_empty())
            .map(|(key, series)| {
                let n = series.len() as f64;
                let (mut lat, mut down, mut up) = (0.0, 0.0, 0.0);
                for m in series.values() {
                    lat += m.latency_ms;
                    down += m.download_mbps;
                    up += m.upload_mbps;
                }
                QosAverage {
                    key: key.clone(),
                    mean_latency_ms: lat / n,
                    mean_download_mbps: down / n,
                    mean_upload_mbps: up / n,
                    sample_count: series.len() as u64,
                }
            })
            .collect()
    }

    /// Samples with `timestamp >= since`, ordered by timestamp then key.
    pub fn samples_since(&self, since: i64) -> Vec<QosSample> {
        let mut out: Vec<QosSample> = self
            .samples
            .iter()
            .flat_map(|(key, series)| {
                series.range(since..).map(move |(&timestamp, m)| QosSample {
                    key: key.clone(),
                    timestamp,
                    latency_ms: m.latency_ms,
                    download_mbps: m.download_mbps,
                    upload_mbps: m.upload_mbps,
                })
            })
            .collect();
        out.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.key.cmp(&b.key)));
        out
    }

    pub fn all_samples(&self) -> Vec<QosSample> {
        self.samples_since(i64::MIN)
    }

    pub fn newest_timestamp(&self) -> Option<i64> {
        self.samples
            .values()
            .filter_map(|s| s.keys().next_back().copied())
            .max()
    }
}
