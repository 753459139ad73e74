//! CSV exchange format for samples.
//!
//! Columns, in order: provider, datacenter_location, service_kind,
//! client_location, timestamp_utc, latency_ms, download_mbps, upload_mbps.
//! A header row is required. UTF-8 with LF line endings.

use serde::{Deserialize, Serialize};

use super::sample::{QosKey, QosSample};

pub const CSV_HEADER: [&str; 8] = [
    "provider",
    "datacenter_location",
    "service_kind",
    "client_location",
    "timestamp_utc",
    "latency_ms",
    "download_mbps",
    "upload_mbps",
];

/// A row that could not be imported. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvImport {
    pub samples: Vec<QosSample>,
    pub errors: Vec<RowError>,
}

fn writer<W: std::io::Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Renders samples as CSV, header first, rows in the given order.
pub fn write_samples(samples: &[QosSample]) -> String {
    let mut w = writer(Vec::new());
    w.write_record(CSV_HEADER).expect("writing to memory");
    for s in samples {
        w.write_record([
            s.key.provider.as_str(),
            s.key.datacenter_location.as_str(),
            s.key.service_kind.as_str(),
            s.key.client_location.as_str(),
            &s.timestamp.to_string(),
            // `{}` on f64 is the shortest string that parses back to the same value.
            &s.latency_ms.to_string(),
            &s.download_mbps.to_string(),
            &s.upload_mbps.to_string(),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("CSV output is UTF-8")
}

/// Parses a CSV document. Bad rows are reported and skipped; good rows are
/// returned even when others fail. A wrong header rejects the whole input.
pub fn parse_samples(text: &str) -> CsvImport {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut out = CsvImport::default();

    match reader.headers() {
        Ok(h) if h.iter().map(str::trim).eq(CSV_HEADER) => {}
        Ok(h) if h.is_empty() && text.trim().is_empty() => {
            out.errors.push(RowError {
                line: 1,
                message: "missing header row".into(),
            });
            return out;
        }
        Ok(h) => {
            out.errors.push(RowError {
                line: 1,
                message: format!(
                    "expected header `{}`, found `{}`",
                    CSV_HEADER.join(","),
                    h.iter().collect::<Vec<_>>().join(",")
                ),
            });
            return out;
        }
        Err(e) => {
            out.errors.push(RowError {
                line: 1,
                message: e.to_string(),
            });
            return out;
        }
    }

    for record in reader.records() {
        match record {
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line());
                match parse_row(&rec) {
                    Ok(s) => out.samples.push(s),
                    Err(message) => out.errors.push(RowError { line, message }),
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                out.errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
            }
        }
    }
    out
}

fn parse_row(rec: &csv::StringRecord) -> Result<QosSample, String> {
    if rec.len() != CSV_HEADER.len() {
        return Err(format!(
            "expected {} fields, found {}",
            CSV_HEADER.len(),
            rec.len()
        ));
    }
    let field = |i: usize| rec.get(i).unwrap_or_default().trim();
    let number = |i: usize| -> Result<f64, String> {
        field(i)
            .parse::<f64>()
            .map_err(|_| format!("{}: invalid number `{}`", CSV_HEADER[i], field(i)))
    };
    let sample = QosSample {
        key: QosKey {
            provider: field(0).to_owned(),
            datacenter_location: field(1).to_owned(),
            service_kind: field(2).parse()?,
            client_location: field(3).to_owned(),
        },
        timestamp: field(4)
            .parse()
            .map_err(|_| format!("timestamp_utc: invalid integer `{}`", field(4)))?,
        latency_ms: number(5)?,
        download_mbps: number(6)?,
        upload_mbps: number(7)?,
    };
    sample.validate().map_err(|e| e.to_string())?;
    Ok(sample)
}
