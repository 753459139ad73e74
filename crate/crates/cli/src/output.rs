//! Table, CSV and JSON renderings of rankings and averages.

use clap::ValueEnum;
use qosrank::catalog::OfferKey;
use qosrank::qos::QosAverage;
use qosrank_service::RankResponse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

const RANK_COLUMNS: [&str; 10] = [
    "rank",
    "provider(s)",
    "compute",
    "storage",
    "network",
    "total_cost",
    "latency_ms",
    "download_mbps",
    "upload_mbps",
    "ratio",
];

const AVERAGE_COLUMNS: [&str; 8] = [
    "provider",
    "datacenter_location",
    "service_kind",
    "client_location",
    "mean_latency_ms",
    "mean_download_mbps",
    "mean_upload_mbps",
    "sample_count",
];

fn key(k: Option<&OfferKey>) -> String {
    k.map_or_else(String::new, ToString::to_string)
}

/// Full precision for machine output; a few digits for tables.
fn num(x: f64, digits: Option<usize>) -> String {
    match digits {
        Some(d) => format!("{x:.d$}"),
        None => x.to_string(),
    }
}

fn ranking_rows(r: &RankResponse, digits: Option<usize>) -> Vec<Vec<String>> {
    r.results
        .iter()
        .map(|c| {
            vec![
                c.rank_position.to_string(),
                c.providers().join("+"),
                key(c.compute.as_ref()),
                key(c.storage.as_ref()),
                c.network.to_string(),
                c.cost.total.to_string(),
                num(c.qos.latency_ms, digits),
                num(c.qos.download_mbps, digits),
                num(c.qos.upload_mbps, digits),
                num(c.ratio, digits.map(|d| d + 4)),
            ]
        })
        .collect()
}

fn average_rows(averages: &[QosAverage], digits: Option<usize>) -> Vec<Vec<String>> {
    averages
        .iter()
        .map(|a| {
            vec![
                a.key.provider.clone(),
                a.key.datacenter_location.clone(),
                a.key.service_kind.to_string(),
                a.key.client_location.clone(),
                num(a.mean_latency_ms, digits),
                num(a.mean_download_mbps, digits),
                num(a.mean_upload_mbps, digits),
                a.sample_count.to_string(),
            ]
        })
        .collect()
}

fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("CSV output is UTF-8")
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for row in rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

pub fn ranking(r: &RankResponse, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(r).expect("response serializes") + "\n",
        Format::Csv => csv(&RANK_COLUMNS, &ranking_rows(r, None)),
        Format::Table => table(&RANK_COLUMNS, &ranking_rows(r, Some(2))),
    }
}

pub fn averages(a: &[QosAverage], format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(a).expect("averages serialize") + "\n",
        Format::Csv => csv(&AVERAGE_COLUMNS, &average_rows(a, None)),
        Format::Table => table(&AVERAGE_COLUMNS, &average_rows(a, Some(2))),
    }
}
