//! Random catalogs, QoS averages, samples and requests for property tests.
//!
//! Prices carry at most four fractional digits and usages at most two, so
//! every cost the library computes is exact at six digits and can be compared
//! with a rational oracle without rounding slack.

use qosrank::ahp::WeightVector;
use qosrank::catalog::{CatalogDocument, Price, PriceTier};
use qosrank::decimal::Bound;
use qosrank::pricing::UsageEstimate;
use qosrank::qos::{QosAverage, QosKey, QosSample, ServiceKind};
use qosrank::ranking::RankRequest;
use qosrank::{ComputeOffer, Location, NetworkOffer, Provider, StorageOffer};
use rand::seq::SliceRandom;
use rand::Rng;
use rust_decimal::Decimal;

pub fn dec(s: &str) -> Decimal {
    s.parse().unwrap()
}

/// `mantissa × 10^-scale`.
pub fn scaled(mantissa: i64, scale: u32) -> Decimal {
    Decimal::new(mantissa, scale)
}

pub fn aud(amount: Decimal) -> Price {
    Price {
        amount,
        currency: "AUD".into(),
    }
}

pub fn tier(min: i64, max: Option<i64>, price: Decimal) -> PriceTier {
    PriceTier {
        quota_min_gb: Decimal::from(min),
        quota_max_gb: max.map_or(Bound::Unbounded, |m| Bound::Finite(Decimal::from(m))),
        unit_price_per_gb: aud(price),
    }
}

fn random_price<R: Rng>(rng: &mut R, max_mantissa: i64) -> Decimal {
    if rng.gen_bool(0.05) {
        Decimal::ZERO
    } else {
        scaled(rng.gen_range(1..=max_mantissa), 4)
    }
}

/// A contiguous schedule with integer bounds, starting at zero.
pub fn random_tiers<R: Rng>(rng: &mut R, bounded_last: bool) -> Vec<PriceTier> {
    let n = rng.gen_range(1..=4);
    let mut bounds = vec![0i64];
    for _ in 1..n {
        let last = *bounds.last().unwrap();
        bounds.push(last + rng.gen_range(1..=400));
    }
    let mut tiers: Vec<PriceTier> = bounds
        .windows(2)
        .map(|w| tier(w[0], Some(w[1]), random_price(rng, 3000)))
        .collect();
    let start = *bounds.last().unwrap();
    let end = bounded_last.then(|| start + rng.gen_range(1..=1500));
    tiers.push(tier(start, end, random_price(rng, 3000)));
    tiers
}

const MEMORY_SIZES: [&str; 9] = ["0.5", "1", "1.7", "2", "3.75", "4", "8", "16", "32"];

/// A valid catalog with at most `max_offers` offers over at most five
/// providers and six locations, all priced in the display currency.
pub fn random_catalog<R: Rng>(rng: &mut R, max_offers: usize) -> CatalogDocument {
    let providers: Vec<Provider> = (0..rng.gen_range(1..=5))
        .map(|i| Provider {
            id: format!("p{i}"),
            display_name: format!("Provider {i}"),
        })
        .collect();
    let locations: Vec<Location> = (0..rng.gen_range(1..=6))
        .map(|i| Location {
            id: format!("l{i}"),
            display_name: format!("Location {i}"),
            latitude: rng.gen_range(-6000..=6000) as f64 / 100.0,
            longitude: rng.gen_range(-17000..=17000) as f64 / 100.0,
        })
        .collect();

    let mut sites: Vec<(String, String)> = providers
        .iter()
        .flat_map(|p| locations.iter().map(move |l| (p.id.clone(), l.id.clone())))
        .collect();
    sites.shuffle(rng);

    let total = rng.gen_range(3..=max_offers.max(3));
    let n_network = rng.gen_range(1..=sites.len().min(total / 3).max(1));
    let n_storage = rng.gen_range(1..=((total - n_network) / 3).max(1));
    let n_compute = (total - n_network - n_storage).max(1);

    let pick = |rng: &mut R| sites[rng.gen_range(0..sites.len())].clone();

    let compute = (0..n_compute)
        .map(|i| {
            let (provider, location) = pick(rng);
            ComputeOffer {
                provider,
                location,
                service_name: format!("vm-{i:03}"),
                memory_gb: dec(MEMORY_SIZES.choose(rng).unwrap()),
                cpu_cores: rng.gen_range(1..=16),
                cpu_speed_ghz: rng.gen_range(10..=35) as f64 / 10.0,
                disk_gb: Decimal::from(*[0, 20, 40, 160, 850].choose(rng).unwrap()),
                price_per_hour: aud(random_price(rng, 40_000)),
            }
        })
        .collect();

    let storage = (0..n_storage)
        .map(|i| {
            let (provider, location) = pick(rng);
            let bounded = rng.gen_bool(0.25);
            StorageOffer {
                provider,
                location,
                service_name: format!("store-{i:03}"),
                tiers: random_tiers(rng, bounded),
                max_capacity_gb: if rng.gen_bool(0.2) {
                    Bound::Finite(Decimal::from(rng.gen_range(50..=3000)))
                } else {
                    Bound::Unbounded
                },
            }
        })
        .collect();

    let network = sites[..n_network]
        .iter()
        .map(|(provider, location)| {
            let inbound_tiers = if rng.gen_bool(0.6) {
                vec![tier(0, None, Decimal::ZERO)]
            } else {
                random_tiers(rng, false)
            };
            let bounded = rng.gen_bool(0.15);
            NetworkOffer {
                provider: provider.clone(),
                location: location.clone(),
                service_name: "data-transfer".into(),
                inbound_tiers,
                outbound_tiers: random_tiers(rng, bounded),
            }
        })
        .collect();

    CatalogDocument {
        display_currency: "AUD".into(),
        providers,
        locations,
        compute,
        storage,
        network,
        exchange_rates: Default::default(),
    }
}

pub const CLIENTS: [&str; 3] = ["l0", "l1", "vantage"];

/// Averages for most (provider, location, kind) sites of the catalog, seen
/// from a few client locations. Some sites are deliberately left out.
pub fn random_averages<R: Rng>(rng: &mut R, doc: &CatalogDocument) -> Vec<QosAverage> {
    let mut out = Vec::new();
    for p in &doc.providers {
        for l in &doc.locations {
            for kind in [ServiceKind::Compute, ServiceKind::Storage] {
                for client in CLIENTS {
                    if rng.gen_bool(0.15) {
                        continue;
                    }
                    out.push(QosAverage {
                        key: QosKey::new(&p.id, &l.id, kind, client),
                        mean_latency_ms: rng.gen_range(1.0..400.0),
                        mean_download_mbps: rng.gen_range(0.5..900.0),
                        mean_upload_mbps: rng.gen_range(0.5..400.0),
                        sample_count: rng.gen_range(1..50),
                    });
                }
            }
        }
    }
    out
}

fn random_weights<R: Rng>(rng: &mut R, criteria: &[&str]) -> WeightVector {
    let raw: Vec<u32> = criteria.iter().map(|_| rng.gen_range(0..=20)).collect();
    let raw = if raw.iter().all(|&r| r == 0) {
        vec![1; criteria.len()]
    } else {
        raw
    };
    let total: u32 = raw.iter().sum();
    WeightVector::new(
        criteria.iter().map(|c| c.to_string()).collect(),
        raw.iter().map(|&r| r as f64 / total as f64).collect(),
    )
    .unwrap()
}

fn random_subset<R: Rng>(rng: &mut R, ids: &[String]) -> Vec<String> {
    if rng.gen_bool(0.6) {
        return Vec::new();
    }
    let mut chosen: Vec<String> = ids.iter().filter(|_| rng.gen_bool(0.5)).cloned().collect();
    if chosen.is_empty() {
        chosen.push(ids.choose(rng).unwrap().clone());
    }
    chosen
}

fn random_amount<R: Rng>(rng: &mut R, max_units: i64) -> Decimal {
    match rng.gen_range(0..4) {
        0 => Decimal::ZERO,
        1 => Decimal::from(rng.gen_range(1..=max_units)),
        _ => scaled(rng.gen_range(1..=max_units * 100), 2),
    }
}

/// A valid request against `doc`.
pub fn random_request<R: Rng>(rng: &mut R, doc: &CatalogDocument) -> RankRequest {
    let usage = loop {
        let u = UsageEstimate {
            compute_instances: *[0, 1, 1, 2, 3].choose(rng).unwrap(),
            compute_hours: *[dec("720"), dec("100"), dec("360.5"), dec("0")]
                .choose(rng)
                .unwrap(),
            storage_gb: random_amount(rng, 1500),
            data_in_gb: random_amount(rng, 600),
            data_out_gb: random_amount(rng, 1500),
            period_label: "30 days".into(),
        };
        if !u.is_empty() {
            break u;
        }
    };
    let mut r = RankRequest::new(*CLIENTS.choose(rng).unwrap(), usage);
    r.providers = random_subset(rng, &doc.providers.iter().map(|p| p.id.clone()).collect::<Vec<_>>());
    r.locations = random_subset(rng, &doc.locations.iter().map(|l| l.id.clone()).collect::<Vec<_>>());
    r.min_memory_gb = dec(["0", "0", "1", "2", "4", "8"].choose(rng).unwrap());
    if rng.gen_bool(0.2) {
        r.max_memory_gb = Some(dec(["4", "8", "16", "32"].choose(rng).unwrap()));
        if r.max_memory_gb < Some(r.min_memory_gb) {
            r.max_memory_gb = None;
        }
    }
    if rng.gen_bool(0.25) {
        r.price_max = Decimal::from(rng.gen_range(0..=800));
    }
    r.cost_weights = if rng.gen_bool(0.3) {
        random_weights(rng, &["cost", "latency"])
    } else {
        random_weights(rng, &["compute_cost", "storage_cost", "network_cost", "latency"])
    };
    r.benefit_weights = match rng.gen_range(0..3) {
        0 => random_weights(rng, &["download", "upload"]),
        1 => random_weights(rng, &["upload", "download", "ram", "disk"]),
        _ => random_weights(rng, &["download", "ram"]),
    };
    r.single_provider = rng.gen_bool(0.3);
    r.normalize = rng.gen_bool(0.2);
    r
}

/// `n` valid samples over a handful of keys, with unique (key, timestamp).
pub fn random_samples<R: Rng>(rng: &mut R, n: usize) -> Vec<QosSample> {
    let keys: Vec<QosKey> = (0..12)
        .map(|i| {
            QosKey::new(
                format!("p{}", i % 3),
                format!("l{}", i % 4),
                if i % 2 == 0 { ServiceKind::Compute } else { ServiceKind::Storage },
                format!("c{}", i % 5),
            )
        })
        .collect();
    let mut next_ts = vec![1_600_000_000i64; keys.len()];
    (0..n)
        .map(|_| {
            let k = rng.gen_range(0..keys.len());
            next_ts[k] += rng.gen_range(1..7200);
            QosSample {
                key: keys[k].clone(),
                timestamp: next_ts[k],
                latency_ms: rng.gen_range(0.01..500.0),
                download_mbps: rng.gen_range(0.01..2000.0),
                upload_mbps: rng.gen_range(0.01..1000.0),
            }
        })
        .collect()
}
