//! Independent reference implementations used to check the library.
//!
//! Money is handled as exact rationals; scores are evaluated from the raw
//! catalog by straightforward enumeration with no shared code beyond the
//! data types.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use qosrank::ahp::WeightVector;
use qosrank::catalog::{Catalog, OfferKey, PriceTier};
use qosrank::decimal::Bound;
use qosrank::qos::{QosAverage, QosSample, ServiceKind};
use qosrank::ranking::RankRequest;
use rust_decimal::Decimal;

pub fn rational(d: Decimal) -> BigRational {
    let scale = d.scale();
    BigRational::new(
        BigInt::from(d.mantissa()),
        BigInt::from(10u32).pow(scale),
    )
}

/// Exact conversion of a rational with a power-of-ten denominator (at most
/// 10^18) to `Decimal`.
pub fn to_decimal(r: &BigRational) -> Decimal {
    let scale = 18u32;
    let scaled = r * BigRational::from_integer(BigInt::from(10u64).pow(scale));
    assert!(scaled.is_integer(), "{r} is not a short decimal");
    let mantissa = scaled.to_integer().to_i128().expect("fits");
    Decimal::from_i128_with_scale(mantissa, scale).normalize()
}

/// Nearest `f64` to a short decimal rational, via its exact decimal string.
pub fn to_f64(r: &BigRational) -> f64 {
    to_decimal(r).to_string().parse().unwrap()
}

/// Tier price of the band containing `[g, g + 1)`.
fn band_price(tiers: &[PriceTier], g: i64) -> Option<BigRational> {
    let g = Decimal::from(g);
    tiers
        .iter()
        .find(|t| {
            t.quota_min_gb <= g
                && match t.quota_max_gb {
                    Bound::Finite(m) => g < m,
                    Bound::Unbounded => true,
                }
        })
        .map(|t| rational(t.unit_price_per_gb.amount))
}

/// Charges every whole gigabyte at the rate of the band it falls in.
/// `None` when some gigabyte lies beyond the schedule.
pub fn per_gb_cost(tiers: &[PriceTier], usage_gb: u32) -> Option<BigRational> {
    let mut total = BigRational::zero();
    for g in 0..usage_gb as i64 {
        total += band_price(tiers, g)?;
    }
    Some(total)
}

/// Marginal cost for fractional usage: Σ rate × clamp(u − min, 0, max − min).
pub fn marginal_cost(tiers: &[PriceTier], usage: Decimal) -> Option<BigRational> {
    if usage.is_zero() {
        return Some(BigRational::zero());
    }
    match tiers.last()?.quota_max_gb {
        Bound::Finite(m) if usage > m => return None,
        _ => {}
    }
    let u = rational(usage);
    let mut total = BigRational::zero();
    for t in tiers {
        let lo = rational(t.quota_min_gb);
        let width = match t.quota_max_gb {
            Bound::Finite(m) => rational(m) - &lo,
            Bound::Unbounded => u.clone(),
        };
        let mut inside = &u - &lo;
        if inside < BigRational::zero() {
            inside = BigRational::zero();
        }
        if inside > width {
            inside = width;
        }
        total += inside * rational(t.unit_price_per_gb.amount);
    }
    Some(total)
}

/// One row of the brute-force ranking.
#[derive(Debug, Clone)]
pub struct OracleRow {
    pub compute: Option<OfferKey>,
    pub storage: Option<OfferKey>,
    pub network: OfferKey,
    pub total: BigRational,
    pub ratio: f64,
}

fn find_average<'a>(
    averages: &'a [QosAverage],
    provider: &str,
    location: &str,
    kind: ServiceKind,
    client: &str,
) -> Option<&'a QosAverage> {
    averages.iter().find(|a| {
        a.key.provider == provider
            && a.key.datacenter_location == location
            && a.key.service_kind == kind
            && a.key.client_location == client
    })
}

fn triple(a: &QosAverage) -> [f64; 3] {
    [a.mean_latency_ms, a.mean_download_mbps, a.mean_upload_mbps]
}

fn mean(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]
}

fn in_scope(list: &[String], id: &str) -> bool {
    list.is_empty() || list.iter().any(|x| x == id)
}

struct Row {
    compute: Option<OfferKey>,
    storage: Option<OfferKey>,
    network: OfferKey,
    total: BigRational,
    values: Vec<(String, f64)>,
}

/// Enumerates every compute × storage × network triple, prices it with
/// rationals and scores it, then sorts by ratio, total cost and keys.
/// Combinations with a zero benefit side are left out. Weights are passed
/// explicitly so judgment-derived requests can be checked too.
pub fn brute_force(
    catalog: &Catalog,
    req: &RankRequest,
    averages: &[QosAverage],
    cost_w: &WeightVector,
    benefit_w: &WeightVector,
) -> Vec<OracleRow> {
    let u = &req.usage;
    let client = req.client_location.as_str();
    let scope = |p: &str, l: &str| in_scope(&req.providers, p) && in_scope(&req.locations, l);

    // (key, cost, qos, memory, disk) per admissible compute offer.
    let mut computes: Vec<Option<(OfferKey, BigRational, [f64; 3], Decimal, Decimal)>> = Vec::new();
    if u.compute_instances > 0 {
        for o in &catalog.compute {
            if !scope(&o.provider, &o.location) || o.memory_gb < req.min_memory_gb {
                continue;
            }
            if matches!(req.max_memory_gb, Some(max) if o.memory_gb > max) {
                continue;
            }
            let Some(avg) = find_average(averages, &o.provider, &o.location, ServiceKind::Compute, client) else {
                continue;
            };
            let cost = BigRational::from_integer(BigInt::from(u.compute_instances))
                * rational(o.price_per_hour.amount)
                * rational(u.compute_hours);
            let n = Decimal::from(u.compute_instances);
            computes.push(Some((o.key(), cost, triple(avg), o.memory_gb * n, o.disk_gb * n)));
        }
    } else {
        computes.push(None);
    }

    let mut storages: Vec<Option<(OfferKey, BigRational, [f64; 3])>> = Vec::new();
    if u.storage_gb > Decimal::ZERO {
        for o in &catalog.storage {
            if !scope(&o.provider, &o.location) {
                continue;
            }
            if matches!(o.max_capacity_gb, Bound::Finite(cap) if u.storage_gb > cap) {
                continue;
            }
            let Some(cost) = marginal_cost(&o.tiers, u.storage_gb) else {
                continue;
            };
            let Some(avg) = find_average(averages, &o.provider, &o.location, ServiceKind::Storage, client) else {
                continue;
            };
            storages.push(Some((o.key(), cost, triple(avg))));
        }
    } else {
        storages.push(None);
    }

    let network_only = u.compute_instances == 0 && u.storage_gb.is_zero();
    let mut networks: Vec<(OfferKey, BigRational, Option<[f64; 3]>)> = Vec::new();
    for o in &catalog.network {
        if !scope(&o.provider, &o.location) {
            continue;
        }
        let (Some(out), Some(inb)) = (
            marginal_cost(&o.outbound_tiers, u.data_out_gb),
            marginal_cost(&o.inbound_tiers, u.data_in_gb),
        ) else {
            continue;
        };
        let site = if network_only {
            let c = find_average(averages, &o.provider, &o.location, ServiceKind::Compute, client);
            let s = find_average(averages, &o.provider, &o.location, ServiceKind::Storage, client);
            match (c, s) {
                (Some(c), Some(s)) => Some(mean(triple(c), triple(s))),
                (Some(x), None) | (None, Some(x)) => Some(triple(x)),
                (None, None) => continue,
            }
        } else {
            None
        };
        networks.push((o.key(), out + inb, site));
    }

    let budget = (req.price_max >= Decimal::ZERO).then(|| rational(req.price_max));
    let site = |k: &OfferKey| (k.provider.clone(), k.location.clone());
    let mut rows = Vec::new();
    for c in &computes {
        for s in &storages {
            for (nk, ncost, nsite) in &networks {
                if req.single_provider {
                    let sites: Vec<_> = [c.as_ref().map(|c| &c.0), s.as_ref().map(|s| &s.0), Some(nk)]
                        .into_iter()
                        .flatten()
                        .map(site)
                        .collect();
                    if sites.iter().any(|x| *x != sites[0]) {
                        continue;
                    }
                }
                let ccost = c.as_ref().map_or(BigRational::zero(), |c| c.1.clone());
                let scost = s.as_ref().map_or(BigRational::zero(), |s| s.1.clone());
                let total = &ccost + &scost + ncost;
                if matches!(&budget, Some(b) if &total > b) {
                    continue;
                }
                let q = match (c, s) {
                    (Some(c), Some(s)) => mean(c.2, s.2),
                    (Some(c), None) => c.2,
                    (None, Some(s)) => s.2,
                    (None, None) => nsite.expect("site QoS"),
                };
                let (memory, disk) = c.as_ref().map_or((0.0, 0.0), |c| {
                    (c.3.to_string().parse().unwrap(), c.4.to_string().parse().unwrap())
                });
                let values = vec![
                    ("compute_cost".to_string(), to_f64(&ccost)),
                    ("storage_cost".to_string(), to_f64(&scost)),
                    ("network_cost".to_string(), to_f64(ncost)),
                    ("cost".to_string(), to_f64(&total)),
                    ("latency".to_string(), q[0]),
                    ("download".to_string(), q[1]),
                    ("upload".to_string(), q[2]),
                    ("ram".to_string(), memory),
                    ("disk".to_string(), disk),
                ];
                rows.push(Row {
                    compute: c.as_ref().map(|c| c.0.clone()),
                    storage: s.as_ref().map(|s| s.0.clone()),
                    network: nk.clone(),
                    total,
                    values,
                });
            }
        }
    }

    if req.normalize {
        let names: Vec<&str> = cost_w.criteria().iter().chain(benefit_w.criteria()).map(String::as_str).collect();
        for name in names {
            let idx = rows.first().map(|r| r.values.iter().position(|(n, _)| n == name).unwrap());
            let Some(idx) = idx else { break };
            let max = rows.iter().map(|r| r.values[idx].1).fold(0.0, f64::max);
            if max > 0.0 {
                for r in &mut rows {
                    r.values[idx].1 /= max;
                }
            }
        }
    }

    let weighted = |values: &[(String, f64)], w: &WeightVector| {
        let mut sum = 0.0;
        for (criterion, weight) in w.iter() {
            let v = values.iter().find(|(n, _)| n == criterion).unwrap().1;
            sum += weight * v;
        }
        sum
    };

    let mut out: Vec<OracleRow> = rows
        .into_iter()
        .filter_map(|r| {
            let num = weighted(&r.values, cost_w);
            let den = weighted(&r.values, benefit_w);
            (den > 0.0).then(|| OracleRow {
                compute: r.compute,
                storage: r.storage,
                network: r.network,
                total: r.total,
                ratio: num / den,
            })
        })
        .collect();
    out.sort_by(|a, b| {
        a.ratio
            .partial_cmp(&b.ratio)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.total.cmp(&b.total))
            .then_with(|| {
                (&a.compute, &a.storage, &a.network).cmp(&(&b.compute, &b.storage, &b.network))
            })
    });
    out
}

/// Per-key means of latency, download and upload, accumulated exactly.
pub fn exact_means(samples: &[QosSample]) -> Vec<(qosrank::QosKey, [f64; 3], u64)> {
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<qosrank::QosKey, ([BigRational; 3], u64)> = BTreeMap::new();
    for s in samples {
        let entry = acc
            .entry(s.key.clone())
            .or_insert_with(|| ([BigRational::zero(), BigRational::zero(), BigRational::zero()], 0));
        for (slot, v) in entry.0.iter_mut().zip([s.latency_ms, s.download_mbps, s.upload_mbps]) {
            *slot += BigRational::from_float(v).unwrap();
        }
        entry.1 += 1;
    }
    acc.into_iter()
        .map(|(k, (sums, n))| {
            let n_r = BigRational::from_integer(BigInt::from(n));
            let means = sums.map(|s| (s / &n_r).to_f64().unwrap());
            (k, means, n)
        })
        .collect()
}

/// Closeness within `tol` relative to the larger magnitude.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
