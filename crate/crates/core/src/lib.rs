//! QoS-aware recommendation of infrastructure service offers.
//!
//! The crate ingests provider catalogs ([`catalog`]) and aggregated network
//! measurements ([`qos`]), derives criterion weights from pairwise judgments
//! ([`ahp`]), prices combined compute/storage/network options ([`pricing`])
//! and ranks them by a weighted cost/benefit ratio ([`ranking`]).

pub mod ahp;
pub mod catalog;
pub mod decimal;
pub mod pricing;
pub mod qos;
pub mod ranking;

pub use ahp::{ComparisonMatrix, Judgment, WeightVector};
pub use catalog::{
    Catalog, CatalogError, CatalogStore, ComputeOffer, Location, NetworkOffer, PriceTier,
    Provider, StorageOffer,
};
pub use pricing::{CostBreakdown, UsageEstimate};
pub use qos::{QosAverage, QosKey, QosSample, QosStore, ServiceKind};
pub use ranking::{RankRequest, Ranking, ScoredCombination};
