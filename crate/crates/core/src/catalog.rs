//! Providers, datacenter locations and the compute/storage/network offers
//! available at them.
//!
//! A [`Catalog`] is loaded from a single JSON document, validated as a
//! whole, and normalized to the display currency. [`CatalogStore`] publishes
//! catalogs as immutable snapshots so readers never observe a partial import.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::sync::{Arc, RwLock};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decimal::{self, round_money, Bound};

pub const DEFAULT_DISPLAY_CURRENCY: &str = "AUD";
pub const DEFAULT_NETWORK_SERVICE: &str = "data-transfer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provider {
    pub id: String,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    pub display_name: String,
    pub latitude: f64,
    pub longitude: f64,
}

/// An amount of money in a given ISO currency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Price {
    #[serde(with = "decimal")]
    pub amount: Decimal,
    pub currency: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputeOffer {
    pub provider: String,
    pub location: String,
    pub service_name: String,
    #[serde(with = "decimal")]
    pub memory_gb: Decimal,
    pub cpu_cores: u32,
    pub cpu_speed_ghz: f64,
    #[serde(with = "decimal")]
    pub disk_gb: Decimal,
    pub price_per_hour: Price,
}

/// One band of a block-declining price schedule, `[quota_min, quota_max)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceTier {
    #[serde(with = "decimal")]
    pub quota_min_gb: Decimal,
    pub quota_max_gb: Bound,
    pub unit_price_per_gb: Price,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageOffer {
    pub provider: String,
    pub location: String,
    pub service_name: String,
    pub tiers: Vec<PriceTier>,
    pub max_capacity_gb: Bound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkOffer {
    pub provider: String,
    pub location: String,
    #[serde(default = "default_network_service")]
    pub service_name: String,
    pub inbound_tiers: Vec<PriceTier>,
    pub outbound_tiers: Vec<PriceTier>,
}

fn default_network_service() -> String {
    DEFAULT_NETWORK_SERVICE.to_owned()
}

/// Identifies one offer of any kind.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OfferKey {
    pub provider: String,
    pub location: String,
    pub service_name: String,
}

impl fmt::Display for OfferKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.provider, self.location, self.service_name)
    }
}

macro_rules! offer_key {
    ($ty:ty) => {
        impl $ty {
            pub fn key(&self) -> OfferKey {
                OfferKey {
                    provider: self.provider.clone(),
                    location: self.location.clone(),
                    service_name: self.service_name.clone(),
                }
            }
        }
    };
}

offer_key!(ComputeOffer);
offer_key!(StorageOffer);
offer_key!(NetworkOffer);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OfferKind {
    Compute,
    Storage,
    Network,
}

impl std::str::FromStr for OfferKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "compute" => Ok(OfferKind::Compute),
            "storage" => Ok(OfferKind::Storage),
            "network" => Ok(OfferKind::Network),
            other => Err(format!("unknown offer kind `{other}`")),
        }
    }
}

/// The catalog document exactly as exchanged on the wire.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogDocument {
    #[serde(default = "default_display_currency")]
    pub display_currency: String,
    #[serde(default)]
    pub providers: Vec<Provider>,
    #[serde(default)]
    pub locations: Vec<Location>,
    #[serde(default)]
    pub compute: Vec<ComputeOffer>,
    #[serde(default)]
    pub storage: Vec<StorageOffer>,
    #[serde(default)]
    pub network: Vec<NetworkOffer>,
    /// Units of display currency per one unit of the keyed currency.
    #[serde(default)]
    pub exchange_rates: BTreeMap<String, Rate>,
}

fn default_display_currency() -> String {
    DEFAULT_DISPLAY_CURRENCY.to_owned()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate(#[serde(with = "decimal")] pub Decimal);

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("malformed catalog document: {0}")]
    Malformed(String),
    #[error("{record}: {message}")]
    Schema { record: String, message: String },
    #[error("{record}: unknown {field} `{id}`")]
    DanglingReference {
        record: String,
        field: &'static str,
        id: String,
    },
    #[error("{record}: {message}")]
    InvalidTiers { record: String, message: String },
}

impl CatalogError {
    /// The record the error refers to, when there is one.
    pub fn record(&self) -> Option<&str> {
        match self {
            CatalogError::Malformed(_) => None,
            CatalogError::Schema { record, .. }
            | CatalogError::DanglingReference { record, .. }
            | CatalogError::InvalidTiers { record, .. } => Some(record),
        }
    }
}

fn schema(record: impl Into<String>, message: impl Into<String>) -> CatalogError {
    CatalogError::Schema {
        record: record.into(),
        message: message.into(),
    }
}

/// A validated catalog with all prices in `display_currency`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Catalog {
    pub version: u64,
    pub display_currency: String,
    pub providers: Vec<Provider>,
    pub locations: Vec<Location>,
    pub compute: Vec<ComputeOffer>,
    pub storage: Vec<StorageOffer>,
    pub network: Vec<NetworkOffer>,
    pub exchange_rates: BTreeMap<String, Rate>,
}

/// Provider and location restriction shared by all offer filters.
///
/// An empty list admits everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scope {
    #[serde(default)]
    pub providers: Vec<String>,
    #[serde(default)]
    pub locations: Vec<String>,
}

impl Scope {
    pub fn admits(&self, provider: &str, location: &str) -> bool {
        (self.providers.is_empty() || self.providers.iter().any(|p| p == provider))
            && (self.locations.is_empty() || self.locations.iter().any(|l| l == location))
    }
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let doc: CatalogDocument =
            serde_json::from_str(text).map_err(|e| CatalogError::Malformed(e.to_string()))?;
        Self::from_document(doc)
    }

    /// Validates a document and converts every price to the display currency.
    pub fn from_document(doc: CatalogDocument) -> Result<Self, CatalogError> {
        let CatalogDocument {
            display_currency,
            providers,
            locations,
            mut compute,
            mut storage,
            mut network,
            exchange_rates,
        } = doc;

        if display_currency.trim().is_empty() {
            return Err(schema("display_currency", "must not be empty"));
        }
        for (code, rate) in &exchange_rates {
            if rate.0 <= Decimal::ZERO {
                return Err(schema(
                    format!("exchange_rates.{code}"),
                    "rate must be positive",
                ));
            }
        }

        let mut provider_ids = HashSet::new();
        for (i, p) in providers.iter().enumerate() {
            let record = format!("providers[{i}]");
            if p.id.trim().is_empty() {
                return Err(schema(record, "id must not be empty"));
            }
            if !provider_ids.insert(p.id.as_str()) {
                return Err(schema(
                    format!("{record} ({})", p.id),
                    "duplicate provider id",
                ));
            }
        }

        let mut location_ids = HashSet::new();
        for (i, l) in locations.iter().enumerate() {
            let record = format!("locations[{i}] ({})", l.id);
            if l.id.trim().is_empty() {
                return Err(schema(format!("locations[{i}]"), "id must not be empty"));
            }
            if !location_ids.insert(l.id.as_str()) {
                return Err(schema(record, "duplicate location id"));
            }
            if !(-90.0..=90.0).contains(&l.latitude) {
                return Err(schema(record, "latitude outside [-90, 90]"));
            }
            if !(-180.0..=180.0).contains(&l.longitude) {
                return Err(schema(record, "longitude outside [-180, 180]"));
            }
        }

        let convert = |record: &str, price: &mut Price| -> Result<(), CatalogError> {
            if price.amount < Decimal::ZERO {
                return Err(schema(record, "price must not be negative"));
            }
            let rate = if price.currency == display_currency {
                Decimal::ONE
            } else {
                exchange_rates
                    .get(&price.currency)
                    .map(|r| r.0)
                    .ok_or_else(|| {
                        schema(
                            record,
                            format!("no exchange rate for currency `{}`", price.currency),
                        )
                    })?
            };
            let amount = price
                .amount
                .checked_mul(rate)
                .ok_or_else(|| schema(record, "price overflows after conversion"))?;
            price.amount = round_money(amount);
            price.currency = display_currency.clone();
            Ok(())
        };

        let check_refs = |record: &str, provider: &str, location: &str| {
            if !provider_ids.contains(provider) {
                return Err(CatalogError::DanglingReference {
                    record: record.to_owned(),
                    field: "provider",
                    id: provider.to_owned(),
                });
            }
            if !location_ids.contains(location) {
                return Err(CatalogError::DanglingReference {
                    record: record.to_owned(),
                    field: "location",
                    id: location.to_owned(),
                });
            }
            Ok(())
        };

        let mut seen = HashSet::new();
        for (i, offer) in compute.iter_mut().enumerate() {
            let record = format!("compute[{i}] ({})", offer.key());
            check_refs(&record, &offer.provider, &offer.location)?;
            if offer.service_name.trim().is_empty() {
                return Err(schema(record, "service_name must not be empty"));
            }
            if !seen.insert(offer.key()) {
                return Err(schema(record, "duplicate (provider, location, service_name)"));
            }
            if offer.memory_gb <= Decimal::ZERO {
                return Err(schema(record, "memory_gb must be positive"));
            }
            if offer.cpu_cores == 0 {
                return Err(schema(record, "cpu_cores must be positive"));
            }
            if !(offer.cpu_speed_ghz.is_finite() && offer.cpu_speed_ghz > 0.0) {
                return Err(schema(record, "cpu_speed_ghz must be positive"));
            }
            if offer.disk_gb < Decimal::ZERO {
                return Err(schema(record, "disk_gb must not be negative"));
            }
            convert(&record, &mut offer.price_per_hour)?;
        }

        let mut seen = HashSet::new();
        for (i, offer) in storage.iter_mut().enumerate() {
            let record = format!("storage[{i}] ({})", offer.key());
            check_refs(&record, &offer.provider, &offer.location)?;
            if offer.service_name.trim().is_empty() {
                return Err(schema(record, "service_name must not be empty"));
            }
            if !seen.insert(offer.key()) {
                return Err(schema(record, "duplicate (provider, location, service_name)"));
            }
            if let Bound::Finite(cap) = offer.max_capacity_gb {
                if cap <= Decimal::ZERO {
                    return Err(schema(record, "max_capacity_gb must be positive"));
                }
            }
            validate_tiers(&record, &offer.tiers)?;
            for tier in &mut offer.tiers {
                convert(&record, &mut tier.unit_price_per_gb)?;
            }
        }

        let mut seen = HashSet::new();
        for (i, offer) in network.iter_mut().enumerate() {
            let record = format!("network[{i}] ({})", offer.key());
            check_refs(&record, &offer.provider, &offer.location)?;
            if !seen.insert(offer.key()) {
                return Err(schema(record, "duplicate (provider, location, service_name)"));
            }
            validate_tiers(&format!("{record} inbound_tiers"), &offer.inbound_tiers)?;
            validate_tiers(&format!("{record} outbound_tiers"), &offer.outbound_tiers)?;
            for tier in offer
                .inbound_tiers
                .iter_mut()
                .chain(offer.outbound_tiers.iter_mut())
            {
                convert(&record, &mut tier.unit_price_per_gb)?;
            }
        }

        Ok(Catalog {
            version: 0,
            display_currency,
            providers,
            locations,
            compute,
            storage,
            network,
            exchange_rates,
        })
    }

    /// The document form of this catalog; prices are already converted.
    pub fn to_document(&self) -> CatalogDocument {
        CatalogDocument {
            display_currency: self.display_currency.clone(),
            providers: self.providers.clone(),
            locations: self.locations.clone(),
            compute: self.compute.clone(),
            storage: self.storage.clone(),
            network: self.network.clone(),
            exchange_rates: self.exchange_rates.clone(),
        }
    }

    pub fn offer_count(&self) -> usize {
        self.compute.len() + self.storage.len() + self.network.len()
    }

    pub fn provider(&self, id: &str) -> Option<&Provider> {
        self.providers.iter().find(|p| p.id == id)
    }

    pub fn location(&self, id: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.id == id)
    }

    /// Compute offers inside `scope` whose memory lies in `[min, max]`.
    pub fn filter_compute(
        &self,
        scope: &Scope,
        min_memory_gb: Decimal,
        max_memory_gb: Option<Decimal>,
    ) -> Vec<&ComputeOffer> {
        self.compute
            .iter()
            .filter(|o| scope.admits(&o.provider, &o.location))
            .filter(|o| o.memory_gb >= min_memory_gb)
            .filter(|o| max_memory_gb.map_or(true, |max| o.memory_gb <= max))
            .collect()
    }

    /// Storage offers inside `scope` able to hold `usage_gb`.
    pub fn filter_storage(&self, scope: &Scope, usage_gb: Decimal) -> Vec<&StorageOffer> {
        self.storage
            .iter()
            .filter(|o| scope.admits(&o.provider, &o.location))
            .filter(|o| o.max_capacity_gb.admits(usage_gb) && tiers_cover(&o.tiers, usage_gb))
            .collect()
    }

    /// Network offers inside `scope` whose tier schedules cover both volumes.
    pub fn filter_network(
        &self,
        scope: &Scope,
        data_in_gb: Decimal,
        data_out_gb: Decimal,
    ) -> Vec<&NetworkOffer> {
        self.network
            .iter()
            .filter(|o| scope.admits(&o.provider, &o.location))
            .filter(|o| {
                tiers_cover(&o.inbound_tiers, data_in_gb)
                    && tiers_cover(&o.outbound_tiers, data_out_gb)
            })
            .collect()
    }
}

/// Whether a validated tier schedule can price `usage_gb`.
pub fn tiers_cover(tiers: &[PriceTier], usage_gb: Decimal) -> bool {
    match tiers.last() {
        Some(last) => last.quota_max_gb.admits(usage_gb),
        None => usage_gb.is_zero(),
    }
}

/// Checks that tiers start at zero, are contiguous, strictly increasing,
/// non-negatively priced, and that only the final tier is unbounded.
pub fn validate_tiers(record: &str, tiers: &[PriceTier]) -> Result<(), CatalogError> {
    let invalid = |message: String| CatalogError::InvalidTiers {
        record: record.to_owned(),
        message,
    };
    let Some(first) = tiers.first() else {
        return Err(invalid("at least one price tier is required".into()));
    };
    if !first.quota_min_gb.is_zero() {
        return Err(invalid(format!(
            "first tier must start at 0, found {}",
            first.quota_min_gb
        )));
    }
    for (i, tier) in tiers.iter().enumerate() {
        if tier.unit_price_per_gb.amount < Decimal::ZERO {
            return Err(invalid(format!("tier {i} has a negative unit price")));
        }
        match tier.quota_max_gb {
            Bound::Finite(max) if max <= tier.quota_min_gb => {
                return Err(invalid(format!(
                    "tier {i} upper bound {max} is not above its lower bound {}",
                    tier.quota_min_gb
                )));
            }
            Bound::Unbounded if i + 1 != tiers.len() => {
                return Err(invalid(format!("tier {i} is unbounded but not last")));
            }
            _ => {}
        }
        if let Some(next) = tiers.get(i + 1) {
            if tier.quota_max_gb != Bound::Finite(next.quota_min_gb) {
                return Err(invalid(format!(
                    "tiers are not contiguous: tier {i} ends at {} but tier {} starts at {}",
                    tier.quota_max_gb,
                    i + 1,
                    next.quota_min_gb
                )));
            }
        }
    }
    Ok(())
}

/// Holds the current catalog snapshot and publishes replacements atomically.
#[derive(Debug, Default)]
pub struct CatalogStore {
    current: RwLock<Option<Arc<Catalog>>>,
}

impl CatalogStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses and validates `text`, then swaps it in as the next version.
    ///
    /// A failed import leaves the previous snapshot in place.
    pub fn import_json(&self, text: &str) -> Result<u64, CatalogError> {
        let catalog = Catalog::from_json(text)?;
        Ok(self.publish(catalog))
    }

    pub fn import_document(&self, doc: CatalogDocument) -> Result<u64, CatalogError> {
        let catalog = Catalog::from_document(doc)?;
        Ok(self.publish(catalog))
    }

    fn publish(&self, mut catalog: Catalog) -> u64 {
        let mut slot = self.current.write().unwrap_or_else(|e| e.into_inner());
        catalog.version = slot.as_ref().map_or(0, |c| c.version) + 1;
        let version = catalog.version;
        *slot = Some(Arc::new(catalog));
        version
    }

    pub fn snapshot(&self) -> Option<Arc<Catalog>> {
        self.current
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    pub fn version(&self) -> u64 {
        self.snapshot().map_or(0, |c| c.version)
    }
}
