//! Cost of using offers: unit and period cost, block-declining tiers, and
//! the combined compute + storage + network total.

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{ComputeOffer, NetworkOffer, PriceTier, StorageOffer};
use crate::decimal::{self, round_money, Bound};

/// Hours in the default 30 day period.
pub const DEFAULT_HOURS: u32 = 720;
pub const DEFAULT_PERIOD_LABEL: &str = "30 days";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PricingError {
    #[error("usage {usage} GB exceeds the last tier bound of {limit} GB")]
    ExceedsTiers { usage: Decimal, limit: Decimal },
    #[error("negative quantity {0}")]
    Negative(Decimal),
    #[error("arithmetic overflow")]
    Overflow,
}

/// Estimated resource use over one billing period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageEstimate {
    #[serde(default = "one")]
    pub compute_instances: u32,
    #[serde(with = "decimal", default = "default_hours")]
    pub compute_hours: Decimal,
    #[serde(with = "decimal", default)]
    pub storage_gb: Decimal,
    #[serde(with = "decimal", default = "default_data_in")]
    pub data_in_gb: Decimal,
    #[serde(with = "decimal", default)]
    pub data_out_gb: Decimal,
    #[serde(default = "default_period_label")]
    pub period_label: String,
}

fn one() -> u32 {
    1
}

fn default_hours() -> Decimal {
    Decimal::from(DEFAULT_HOURS)
}

fn default_data_in() -> Decimal {
    Decimal::ONE
}

fn default_period_label() -> String {
    DEFAULT_PERIOD_LABEL.to_owned()
}

impl Default for UsageEstimate {
    fn default() -> Self {
        Self {
            compute_instances: 1,
            compute_hours: default_hours(),
            storage_gb: Decimal::ZERO,
            data_in_gb: default_data_in(),
            data_out_gb: Decimal::ZERO,
            period_label: default_period_label(),
        }
    }
}

impl UsageEstimate {
    pub fn uses_compute(&self) -> bool {
        self.compute_instances > 0
    }

    pub fn uses_storage(&self) -> bool {
        self.storage_gb > Decimal::ZERO
    }

    /// Field name and value of every quantity that is negative.
    pub fn negative_fields(&self) -> Vec<(&'static str, Decimal)> {
        [
            ("compute_hours", self.compute_hours),
            ("storage_gb", self.storage_gb),
            ("data_in_gb", self.data_in_gb),
            ("data_out_gb", self.data_out_gb),
        ]
        .into_iter()
        .filter(|(_, v)| *v < Decimal::ZERO)
        .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.compute_instances == 0
            && self.storage_gb.is_zero()
            && self.data_in_gb.is_zero()
            && self.data_out_gb.is_zero()
    }
}

/// Cost of one combined option, in display currency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostBreakdown {
    #[serde(with = "decimal")]
    pub compute_cost: Decimal,
    #[serde(with = "decimal")]
    pub storage_cost: Decimal,
    #[serde(with = "decimal")]
    pub network_cost: Decimal,
    #[serde(with = "decimal")]
    pub total: Decimal,
}

impl CostBreakdown {
    pub fn new(compute_cost: Decimal, storage_cost: Decimal, network_cost: Decimal) -> Self {
        Self {
            compute_cost,
            storage_cost,
            network_cost,
            total: compute_cost + storage_cost + network_cost,
        }
    }
}

fn non_negative(value: Decimal) -> Result<Decimal, PricingError> {
    if value < Decimal::ZERO {
        Err(PricingError::Negative(value))
    } else {
        Ok(value)
    }
}

/// Usage times unit price, rounded to six fractional digits.
pub fn unit_cost(usage: Decimal, unit_price: Decimal) -> Result<Decimal, PricingError> {
    let product = non_negative(usage)?
        .checked_mul(non_negative(unit_price)?)
        .ok_or(PricingError::Overflow)?;
    Ok(round_money(product))
}

/// Usage times unit price times duration, rounded to six fractional digits.
pub fn period_cost(
    usage: Decimal,
    unit_price: Decimal,
    duration: Decimal,
) -> Result<Decimal, PricingError> {
    let duration = non_negative(duration)?;
    let product = non_negative(usage)?
        .checked_mul(non_negative(unit_price)?)
        .and_then(|p| p.checked_mul(duration))
        .ok_or(PricingError::Overflow)?;
    Ok(round_money(product))
}

/// Marginal cost of `usage_gb` under a block-declining schedule.
///
/// Each band bills only the part of the usage that falls inside it, at its
/// own rate. Usage beyond a bounded final tier is infeasible.
pub fn tiered_cost(tiers: &[PriceTier], usage_gb: Decimal) -> Result<Decimal, PricingError> {
    non_negative(usage_gb)?;
    if usage_gb.is_zero() {
        return Ok(Decimal::ZERO);
    }
    if let Some(Bound::Finite(limit)) = tiers.last().map(|t| t.quota_max_gb) {
        if usage_gb > limit {
            return Err(PricingError::ExceedsTiers {
                usage: usage_gb,
                limit,
            });
        }
    }
    if tiers.is_empty() {
        return Err(PricingError::ExceedsTiers {
            usage: usage_gb,
            limit: Decimal::ZERO,
        });
    }

    let mut total = Decimal::ZERO;
    for tier in tiers {
        if usage_gb <= tier.quota_min_gb {
            break;
        }
        let upper = match tier.quota_max_gb {
            Bound::Finite(max) => usage_gb.min(max),
            Bound::Unbounded => usage_gb,
        };
        let band = upper - tier.quota_min_gb;
        let cost = band
            .checked_mul(tier.unit_price_per_gb.amount)
            .ok_or(PricingError::Overflow)?;
        total = total.checked_add(cost).ok_or(PricingError::Overflow)?;
    }
    Ok(round_money(total))
}

pub fn compute_cost(offer: &ComputeOffer, usage: &UsageEstimate) -> Result<Decimal, PricingError> {
    period_cost(
        Decimal::from(usage.compute_instances),
        offer.price_per_hour.amount,
        usage.compute_hours,
    )
}

pub fn storage_cost(offer: &StorageOffer, usage: &UsageEstimate) -> Result<Decimal, PricingError> {
    if let Bound::Finite(cap) = offer.max_capacity_gb {
        if usage.storage_gb > cap {
            return Err(PricingError::ExceedsTiers {
                usage: usage.storage_gb,
                limit: cap,
            });
        }
    }
    tiered_cost(&offer.tiers, usage.storage_gb)
}

pub fn network_cost(offer: &NetworkOffer, usage: &UsageEstimate) -> Result<Decimal, PricingError> {
    let outbound = tiered_cost(&offer.outbound_tiers, usage.data_out_gb)?;
    let inbound = tiered_cost(&offer.inbound_tiers, usage.data_in_gb)?;
    Ok(outbound + inbound)
}

/// Cost of a combination. Absent kinds (zero usage) contribute nothing;
/// network is always priced.
pub fn total_cost(
    compute: Option<&ComputeOffer>,
    storage: Option<&StorageOffer>,
    network: &NetworkOffer,
    usage: &UsageEstimate,
) -> Result<CostBreakdown, PricingError> {
    let compute = match compute {
        Some(offer) => compute_cost(offer, usage)?,
        None => Decimal::ZERO,
    };
    let storage = match storage {
        Some(offer) => storage_cost(offer, usage)?,
        None => Decimal::ZERO,
    };
    Ok(CostBreakdown::new(
        compute,
        storage,
        network_cost(network, usage)?,
    ))
}
