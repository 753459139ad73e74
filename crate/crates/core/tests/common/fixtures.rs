//! Hand-built catalogs and inputs with known properties.

use qosrank::ahp::Judgment;
use qosrank::catalog::{Catalog, CatalogDocument};
use qosrank::decimal::Bound;
use qosrank::pricing::UsageEstimate;
use qosrank::qos::{QosAverage, QosKey, ServiceKind};
use qosrank::ranking::RankRequest;
use qosrank::{ComputeOffer, Location, NetworkOffer, Provider, StorageOffer};
use rust_decimal::Decimal;

use super::gen::{aud, dec, tier};

/// Upload, download, RAM and disk compared pairwise; the worked example
/// used throughout the documentation.
pub fn worked_judgments() -> Vec<Judgment> {
    vec![
        Judgment::new("upload", "download", 1.0 / 3.0),
        Judgment::new("upload", "ram", 1.0 / 5.0),
        Judgment::new("upload", "disk", 1.0 / 5.0),
        Judgment::new("download", "ram", 3.0),
        Judgment::new("download", "disk", 5.0),
        Judgment::new("ram", "disk", 3.0),
    ]
}

/// Storage 20 GB, 50 GB out, 1 GB in, one instance for 720 hours.
pub fn default_usage() -> UsageEstimate {
    UsageEstimate {
        storage_gb: dec("20"),
        data_out_gb: dec("50"),
        ..UsageEstimate::default()
    }
}

/// Default request with a 4 GB memory floor.
pub fn default_request(client: &str) -> RankRequest {
    let mut r = RankRequest::new(client, default_usage());
    r.min_memory_gb = dec("4");
    r
}

fn provider(id: &str) -> Provider {
    Provider {
        id: id.into(),
        display_name: id.to_uppercase(),
    }
}

fn location(id: &str, lat: f64, lon: f64) -> Location {
    Location {
        id: id.into(),
        display_name: id.to_uppercase(),
        latitude: lat,
        longitude: lon,
    }
}

fn average(provider: &str, location: &str, kind: ServiceKind, client: &str, q: [f64; 3]) -> QosAverage {
    QosAverage {
        key: QosKey::new(provider, location, kind, client),
        mean_latency_ms: q[0],
        mean_download_mbps: q[1],
        mean_upload_mbps: q[2],
        sample_count: 10,
    }
}

fn flat_network(provider: &str, location: &str, out_price: &str) -> NetworkOffer {
    NetworkOffer {
        provider: provider.into(),
        location: location.into(),
        service_name: "data-transfer".into(),
        inbound_tiers: vec![tier(0, None, Decimal::ZERO)],
        outbound_tiers: vec![tier(0, Some(10), Decimal::ZERO), tier(10, None, dec(out_price))],
    }
}

fn flat_storage(provider: &str, location: &str, price: &str) -> StorageOffer {
    StorageOffer {
        provider: provider.into(),
        location: location.into(),
        service_name: "object-store".into(),
        tiers: vec![tier(0, Some(1000), dec(price)), tier(1000, None, dec("0.05"))],
        max_capacity_gb: Bound::Unbounded,
    }
}

/// Exactly 3808 compute offers, one storage offer and one network offer,
/// all with QoS from `l0`. Raising the memory floor through 0, 4, 8 and 16 GB
/// leaves 3808, 2095, 1524 and 552 combinations.
pub fn scaling_catalog() -> (Catalog, Vec<QosAverage>) {
    let providers = ["p0", "p1", "p2", "p3"];
    let locations: Vec<Location> = (0..6)
        .map(|i| location(&format!("l{i}"), -30.0 + 10.0 * i as f64, 100.0 + 12.0 * i as f64))
        .collect();
    let compute: Vec<ComputeOffer> = (0..3808)
        .map(|i| {
            let memory = match i {
                _ if i < 552 => ["16", "32"][i % 2],
                _ if i < 1524 => "8",
                _ if i < 2095 => "4",
                _ => ["1", "2", "3.75"][i % 3],
            };
            ComputeOffer {
                provider: providers[i % 4].into(),
                location: locations[(i / 4) % 6].id.clone(),
                service_name: format!("vm-{i:04}"),
                memory_gb: dec(memory),
                cpu_cores: 1 + (i % 8) as u32,
                cpu_speed_ghz: 2.4,
                disk_gb: Decimal::from(20 * (i % 5)),
                price_per_hour: aud(Decimal::new(100 + (i as i64 * 7919) % 9000, 4)),
            }
        })
        .collect();
    let doc = CatalogDocument {
        display_currency: "AUD".into(),
        providers: providers.iter().map(|p| provider(p)).collect(),
        locations: locations.clone(),
        compute,
        storage: vec![flat_storage("p0", "l0", "0.1")],
        network: vec![flat_network("p0", "l0", "0.12")],
        exchange_rates: Default::default(),
    };
    let mut averages = Vec::new();
    for (pi, p) in providers.iter().enumerate() {
        for (li, l) in locations.iter().enumerate() {
            let q = [20.0 + (pi * 6 + li) as f64, 50.0 + 3.0 * li as f64, 10.0 + pi as f64];
            averages.push(average(p, &l.id, ServiceKind::Compute, "l0", q));
            averages.push(average(p, &l.id, ServiceKind::Storage, "l0", q));
        }
    }
    (Catalog::from_document(doc).unwrap(), averages)
}

/// Two single-site providers. `budget` is cheaper for every kind of offer
/// but its download speed from `mel` is 25 times worse than `premium`'s.
pub fn divergence_catalog() -> (Catalog, Vec<QosAverage>) {
    let doc = CatalogDocument {
        display_currency: "AUD".into(),
        providers: vec![provider("budget"), provider("premium")],
        locations: vec![
            location("mel", -37.81, 144.96),
            location("syd", -33.87, 151.21),
            location("sin", 1.35, 103.82),
        ],
        compute: vec![
            ComputeOffer {
                provider: "budget".into(),
                location: "sin".into(),
                service_name: "small".into(),
                memory_gb: dec("4"),
                cpu_cores: 2,
                cpu_speed_ghz: 2.0,
                disk_gb: dec("20"),
                price_per_hour: aud(dec("0.05")),
            },
            ComputeOffer {
                provider: "premium".into(),
                location: "syd".into(),
                service_name: "small".into(),
                memory_gb: dec("4"),
                cpu_cores: 2,
                cpu_speed_ghz: 2.0,
                disk_gb: dec("20"),
                price_per_hour: aud(dec("0.07")),
            },
        ],
        storage: vec![flat_storage("budget", "sin", "0.02"), flat_storage("premium", "syd", "0.03")],
        network: vec![flat_network("budget", "sin", "0.09"), flat_network("premium", "syd", "0.12")],
        exchange_rates: Default::default(),
    };
    let mut averages = Vec::new();
    for kind in [ServiceKind::Compute, ServiceKind::Storage] {
        averages.push(average("budget", "sin", kind, "mel", [180.0, 4.0, 2.0]));
        averages.push(average("premium", "syd", kind, "mel", [15.0, 100.0, 40.0]));
    }
    (Catalog::from_document(doc).unwrap(), averages)
}

/// The sample catalog shipped with the repository.
pub fn shipped_catalog() -> Catalog {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/catalog.json");
    Catalog::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Averages derived from the sample QoS measurements shipped with the
/// repository.
pub fn shipped_averages() -> Vec<QosAverage> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/qos.csv");
    let parsed = qosrank::qos::parse_samples(&std::fs::read_to_string(path).unwrap());
    assert!(parsed.errors.is_empty(), "{:?}", parsed.errors);
    let mut store = qosrank::QosStore::new();
    store.merge(&parsed.samples);
    store.averages()
}

/// The request shipped with the repository.
pub fn shipped_request() -> RankRequest {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/request.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
