//! End-to-end recommendation: filter offers, join them with QoS averages,
//! enumerate compute × storage × network combinations, price and score each
//! one, and sort.
//!
//! The score is a cost/benefit ratio, lower is better:
//!
//! ```text
//!          Σ w_k · cost_k + w_latency · latency
//! ratio = ----------------------------------------
//!          Σ w_b · benefit_b
//! ```
//!
//! where the cost side uses either per-kind costs (`compute_cost`,
//! `storage_cost`, `network_cost`) or the combined `cost`, and the benefit
//! side uses any of `download`, `upload`, `ram` and `disk`. Raw criterion
//! values are combined as they are unless normalization is requested.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ahp::{ComparisonMatrix, Judgment, WeightVector};
use crate::catalog::{Catalog, ComputeOffer, NetworkOffer, OfferKey, Scope, StorageOffer};
use crate::decimal::{self, to_f64};
use crate::pricing::{self, CostBreakdown, UsageEstimate};
use crate::qos::{estimate_metric, QosAverage, QosKey, ServiceKind};

/// Criterion names accepted in weight vectors and judgments.
pub mod criteria {
    pub const COMPUTE_COST: &str = "compute_cost";
    pub const STORAGE_COST: &str = "storage_cost";
    pub const NETWORK_COST: &str = "network_cost";
    /// Total cost of the combination, an alternative to the per-kind costs.
    pub const COST: &str = "cost";
    pub const LATENCY: &str = "latency";
    pub const DOWNLOAD: &str = "download";
    pub const UPLOAD: &str = "upload";
    pub const RAM: &str = "ram";
    pub const DISK: &str = "disk";

    pub const COST_SIDE: [&str; 5] = [COMPUTE_COST, STORAGE_COST, NETWORK_COST, COST, LATENCY];
    pub const BENEFIT_SIDE: [&str; 4] = [DOWNLOAD, UPLOAD, RAM, DISK];
}

/// Cost-side weights used when a request gives none.
pub fn default_cost_weights() -> WeightVector {
    WeightVector::from_pairs([
        (criteria::COMPUTE_COST, 0.35),
        (criteria::STORAGE_COST, 0.25),
        (criteria::NETWORK_COST, 0.35),
        (criteria::LATENCY, 0.05),
    ])
    .expect("default weights are valid")
}

/// Benefit-side weights used when a request gives none.
pub fn default_benefit_weights() -> WeightVector {
    WeightVector::from_pairs([(criteria::DOWNLOAD, 0.7), (criteria::UPLOAD, 0.3)])
        .expect("default weights are valid")
}

fn unbounded_price() -> Decimal {
    Decimal::NEGATIVE_ONE
}

/// User constraints, usage estimate and preferences for one ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankRequest {
    /// Datacenter locations to consider; empty means all.
    #[serde(default)]
    pub locations: Vec<String>,
    /// Providers to consider; empty means all.
    #[serde(default)]
    pub providers: Vec<String>,
    #[serde(with = "decimal", default)]
    pub min_memory_gb: Decimal,
    #[serde(with = "decimal::option", default)]
    pub max_memory_gb: Option<Decimal>,
    /// Budget on the total cost of a combination. `-1` is unbounded and `0`
    /// admits only free combinations.
    #[serde(with = "decimal", default = "unbounded_price")]
    pub price_max: Decimal,
    #[serde(default)]
    pub usage: UsageEstimate,
    pub client_location: String,
    #[serde(default = "default_cost_weights")]
    pub cost_weights: WeightVector,
    #[serde(default = "default_benefit_weights")]
    pub benefit_weights: WeightVector,
    /// Pairwise judgments replacing `cost_weights` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_judgments: Option<Vec<Judgment>>,
    /// Pairwise judgments replacing `benefit_weights` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benefit_judgments: Option<Vec<Judgment>>,
    /// Only combine offers from the same provider and location.
    #[serde(default)]
    pub single_provider: bool,
    /// Estimate QoS from distance for offers that have no averages.
    #[serde(default)]
    pub estimate_missing_qos: bool,
    /// Divide every criterion by its largest value over the candidates.
    #[serde(default)]
    pub normalize: bool,
}

impl RankRequest {
    pub fn new(client_location: impl Into<String>, usage: UsageEstimate) -> Self {
        Self {
            locations: Vec::new(),
            providers: Vec::new(),
            min_memory_gb: Decimal::ZERO,
            max_memory_gb: None,
            price_max: unbounded_price(),
            usage,
            client_location: client_location.into(),
            cost_weights: default_cost_weights(),
            benefit_weights: default_benefit_weights(),
            cost_judgments: None,
            benefit_judgments: None,
            single_provider: false,
            estimate_missing_qos: false,
            normalize: false,
        }
    }

    pub fn scope(&self) -> Scope {
        Scope {
            providers: self.providers.clone(),
            locations: self.locations.clone(),
        }
    }

    pub fn budget(&self) -> Option<Decimal> {
        (self.price_max >= Decimal::ZERO).then_some(self.price_max)
    }

    /// The weights in force, derived from judgments where those are given.
    pub fn effective_weights(&self) -> Result<(WeightVector, WeightVector), Vec<FieldError>> {
        let mut errors = Vec::new();
        let mut resolve = |field: &str, direct: &WeightVector, judgments: &Option<Vec<Judgment>>| {
            match judgments {
                Some(j) => match ComparisonMatrix::from_judgments(j) {
                    Ok(m) => Some(m.weights()),
                    Err(e) => {
                        errors.push(FieldError::new(field, e.to_string()));
                        None
                    }
                },
                None => Some(direct.clone()),
            }
        };
        let cost = resolve("cost_judgments", &self.cost_weights, &self.cost_judgments);
        let benefit = resolve(
            "benefit_judgments",
            &self.benefit_weights,
            &self.benefit_judgments,
        );
        match (cost, benefit) {
            (Some(c), Some(b)) if errors.is_empty() => Ok((c, b)),
            _ => Err(errors),
        }
    }

    /// Checks the request against itself and the catalog.
    pub fn validate(&self, catalog: &Catalog) -> Result<(WeightVector, WeightVector), RankError> {
        let mut errors = Vec::new();

        for p in &self.providers {
            if catalog.provider(p).is_none() {
                errors.push(FieldError::new("providers", format!("unknown provider `{p}`")));
            }
        }
        for l in &self.locations {
            if catalog.location(l).is_none() {
                errors.push(FieldError::new("locations", format!("unknown location `{l}`")));
            }
        }
        // Vantage points need not be datacenters, so any id is accepted here.
        if self.client_location.trim().is_empty() {
            errors.push(FieldError::new("client_location", "must not be empty"));
        }
        if self.min_memory_gb < Decimal::ZERO {
            errors.push(FieldError::new("min_memory_gb", "must not be negative"));
        }
        if let Some(max) = self.max_memory_gb {
            if max < self.min_memory_gb {
                errors.push(FieldError::new("max_memory_gb", "must not be below min_memory_gb"));
            }
        }
        if self.price_max < Decimal::ZERO && self.price_max != Decimal::NEGATIVE_ONE {
            errors.push(FieldError::new(
                "price_max",
                "must be -1 (unbounded) or a non-negative amount",
            ));
        }
        for (field, value) in self.usage.negative_fields() {
            errors.push(FieldError::new(
                format!("usage.{field}"),
                format!("must not be negative, got {value}"),
            ));
        }
        if self.usage.is_empty() {
            errors.push(FieldError::new("usage", "at least one quantity must be positive"));
        }

        let weights = match self.effective_weights() {
            Ok((cost, benefit)) => {
                check_criteria("cost_weights", &cost, &criteria::COST_SIDE, &mut errors);
                if cost.get(criteria::COST).is_some()
                    && [criteria::COMPUTE_COST, criteria::STORAGE_COST, criteria::NETWORK_COST]
                        .iter()
                        .any(|c| cost.get(c).is_some())
                {
                    errors.push(FieldError::new(
                        "cost_weights",
                        "`cost` cannot be combined with per-kind cost criteria",
                    ));
                }
                check_criteria("benefit_weights", &benefit, &criteria::BENEFIT_SIDE, &mut errors);
                Some((cost, benefit))
            }
            Err(mut e) => {
                errors.append(&mut e);
                None
            }
        };

        match weights {
            Some(w) if errors.is_empty() => Ok(w),
            _ => Err(RankError::Invalid(errors)),
        }
    }
}

fn check_criteria(field: &str, w: &WeightVector, allowed: &[&str], errors: &mut Vec<FieldError>) {
    for c in w.criteria() {
        if !allowed.contains(&c.as_str()) {
            errors.push(FieldError::new(
                field,
                format!("unknown criterion `{c}`, expected one of {}", allowed.join(", ")),
            ));
        }
    }
}

/// A validation problem tied to a request field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankError {
    #[error("invalid request: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FieldError>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("benefit side is zero")]
    ZeroDenominator,
}

/// Where an effective QoS triple came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QosSource {
    Compute,
    Storage,
    /// Mean of the compute and storage averages.
    ComputeStorageMean,
    /// Averages at the network offer's site, for network-only requests.
    NetworkSite,
}

/// Latency (ms), download and upload (Mbit/s) used to score a combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveQos {
    pub latency_ms: f64,
    pub download_mbps: f64,
    pub upload_mbps: f64,
    pub source: QosSource,
    /// True when any contributing value is a distance estimate.
    pub estimated: bool,
}

/// A measured or estimated QoS triple for one offer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosTriple {
    pub latency_ms: f64,
    pub download_mbps: f64,
    pub upload_mbps: f64,
    pub estimated: bool,
}

impl From<&QosAverage> for QosTriple {
    fn from(a: &QosAverage) -> Self {
        Self {
            latency_ms: a.mean_latency_ms,
            download_mbps: a.mean_download_mbps,
            upload_mbps: a.mean_upload_mbps,
            estimated: false,
        }
    }
}

fn mean_triple(a: QosTriple, b: QosTriple) -> QosTriple {
    QosTriple {
        latency_ms: (a.latency_ms + b.latency_ms) / 2.0,
        download_mbps: (a.download_mbps + b.download_mbps) / 2.0,
        upload_mbps: (a.upload_mbps + b.upload_mbps) / 2.0,
        estimated: a.estimated || b.estimated,
    }
}

/// Combines the compute and storage QoS of a combination: the mean of both
/// when both kinds are used, otherwise whichever one is present.
pub fn combine_qos(compute: Option<QosTriple>, storage: Option<QosTriple>) -> Option<EffectiveQos> {
    let (t, source) = match (compute, storage) {
        (Some(c), Some(s)) => (mean_triple(c, s), QosSource::ComputeStorageMean),
        (Some(c), None) => (c, QosSource::Compute),
        (None, Some(s)) => (s, QosSource::Storage),
        (None, None) => return None,
    };
    Some(EffectiveQos {
        latency_ms: t.latency_ms,
        download_mbps: t.download_mbps,
        upload_mbps: t.upload_mbps,
        source,
        estimated: t.estimated,
    })
}

/// QoS averages indexed by key.
#[derive(Debug, Clone, Default)]
pub struct QosIndex<'a> {
    by_key: HashMap<&'a QosKey, &'a QosAverage>,
    all: &'a [QosAverage],
}

impl<'a> QosIndex<'a> {
    pub fn new(averages: &'a [QosAverage]) -> Self {
        Self {
            by_key: averages.iter().map(|a| (&a.key, a)).collect(),
            all: averages,
        }
    }

    pub fn get(&self, key: &QosKey) -> Option<&'a QosAverage> {
        self.by_key.get(key).copied()
    }
}

/// Effective QoS for a combination given the keys of the kinds it uses.
pub fn effective_qos(
    compute_key: Option<&QosKey>,
    storage_key: Option<&QosKey>,
    averages: &QosIndex<'_>,
) -> Option<EffectiveQos> {
    let lookup = |k: Option<&QosKey>| k.and_then(|k| averages.get(k)).map(QosTriple::from);
    let (c, s) = (lookup(compute_key), lookup(storage_key));
    if compute_key.is_some() && c.is_none() || storage_key.is_some() && s.is_none() {
        return None;
    }
    combine_qos(c, s)
}

/// Raw values of every criterion for one combination.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CriterionValues {
    pub compute_cost: f64,
    pub storage_cost: f64,
    pub network_cost: f64,
    pub cost: f64,
    pub latency: f64,
    pub download: f64,
    pub upload: f64,
    pub ram: f64,
    pub disk: f64,
}

impl CriterionValues {
    pub fn new(cost: &CostBreakdown, qos: &EffectiveQos, memory_gb: f64, disk_gb: f64) -> Self {
        Self {
            compute_cost: to_f64(cost.compute_cost),
            storage_cost: to_f64(cost.storage_cost),
            network_cost: to_f64(cost.network_cost),
            cost: to_f64(cost.total),
            latency: qos.latency_ms,
            download: qos.download_mbps,
            upload: qos.upload_mbps,
            ram: memory_gb,
            disk: disk_gb,
        }
    }

    pub fn get(&self, criterion: &str) -> Option<f64> {
        Some(match criterion {
            criteria::COMPUTE_COST => self.compute_cost,
            criteria::STORAGE_COST => self.storage_cost,
            criteria::NETWORK_COST => self.network_cost,
            criteria::COST => self.cost,
            criteria::LATENCY => self.latency,
            criteria::DOWNLOAD => self.download,
            criteria::UPLOAD => self.upload,
            criteria::RAM => self.ram,
            criteria::DISK => self.disk,
            _ => return None,
        })
    }

    fn get_mut(&mut self, criterion: &str) -> Option<&mut f64> {
        Some(match criterion {
            criteria::COMPUTE_COST => &mut self.compute_cost,
            criteria::STORAGE_COST => &mut self.storage_cost,
            criteria::NETWORK_COST => &mut self.network_cost,
            criteria::COST => &mut self.cost,
            criteria::LATENCY => &mut self.latency,
            criteria::DOWNLOAD => &mut self.download,
            criteria::UPLOAD => &mut self.upload,
            criteria::RAM => &mut self.ram,
            criteria::DISK => &mut self.disk,
            _ => return None,
        })
    }
}

/// One weighted criterion in a score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub criterion: String,
    pub weight: f64,
    pub value: f64,
    pub weighted: f64,
}

/// Itemized cost/benefit ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub numerator_terms: Vec<Term>,
    pub denominator_terms: Vec<Term>,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

fn weighted_terms(values: &CriterionValues, weights: &WeightVector) -> (Vec<Term>, f64) {
    let mut sum = 0.0;
    let terms = weights
        .iter()
        .map(|(criterion, weight)| {
            let value = values.get(criterion).unwrap_or(0.0);
            let weighted = weight * value;
            sum += weighted;
            Term {
                criterion: criterion.to_owned(),
                weight,
                value,
                weighted,
            }
        })
        .collect();
    (terms, sum)
}

/// Scores criterion values; terms are summed in weight-vector order.
pub fn score_values(
    values: &CriterionValues,
    cost_weights: &WeightVector,
    benefit_weights: &WeightVector,
) -> Result<ScoreBreakdown, ScoreError> {
    let (numerator_terms, numerator) = weighted_terms(values, cost_weights);
    let (denominator_terms, denominator) = weighted_terms(values, benefit_weights);
    if !(denominator > 0.0) {
        return Err(ScoreError::ZeroDenominator);
    }
    Ok(ScoreBreakdown {
        numerator_terms,
        denominator_terms,
        numerator,
        denominator,
        ratio: numerator / denominator,
    })
}

/// Cost/benefit ratio of a combination. `memory_gb` and `disk_gb` are the
/// totals provisioned by its compute instances.
pub fn score(
    cost: &CostBreakdown,
    qos: &EffectiveQos,
    cost_weights: &WeightVector,
    benefit_weights: &WeightVector,
    memory_gb: f64,
    disk_gb: f64,
) -> Result<ScoreBreakdown, ScoreError> {
    score_values(
        &CriterionValues::new(cost, qos, memory_gb, disk_gb),
        cost_weights,
        benefit_weights,
    )
}

/// One ranked compute + storage + network option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCombination {
    pub rank_position: usize,
    /// Absent when the request uses no compute.
    pub compute: Option<OfferKey>,
    /// Absent when the request uses no storage.
    pub storage: Option<OfferKey>,
    pub network: OfferKey,
    pub cost: CostBreakdown,
    pub qos: EffectiveQos,
    pub ratio: f64,
    pub score: ScoreBreakdown,
}

impl ScoredCombination {
    fn sort_key(&self) -> (Option<&OfferKey>, Option<&OfferKey>, &OfferKey) {
        (self.compute.as_ref(), self.storage.as_ref(), &self.network)
    }

    /// Distinct providers in the combination, in compute/storage/network order.
    pub fn providers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for k in [self.compute.as_ref(), self.storage.as_ref(), Some(&self.network)]
            .into_iter()
            .flatten()
        {
            if !out.contains(&k.provider.as_str()) {
                out.push(&k.provider);
            }
        }
        out
    }
}

/// Something left out of a ranking, and why.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exclusion {
    pub subject: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub solutions: Vec<ScoredCombination>,
    pub excluded: Vec<Exclusion>,
    /// Combinations priced and scored (before the budget and score checks).
    pub evaluated: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    /// Ascending cost/benefit ratio.
    #[default]
    Ratio,
    /// Ascending total cost; QoS does not affect the order.
    Cost,
}

impl std::str::FromStr for SortOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ratio" => Ok(SortOrder::Ratio),
            "cost" => Ok(SortOrder::Cost),
            other => Err(format!("unknown sort order `{other}`")),
        }
    }
}

pub fn compare_by_ratio(a: &ScoredCombination, b: &ScoredCombination) -> Ordering {
    a.ratio
        .total_cmp(&b.ratio)
        .then_with(|| a.cost.total.cmp(&b.cost.total))
        .then_with(|| a.sort_key().cmp(&b.sort_key()))
}

pub fn compare_by_cost(a: &ScoredCombination, b: &ScoredCombination) -> Ordering {
    a.cost
        .total
        .cmp(&b.cost.total)
        .then_with(|| a.sort_key().cmp(&b.sort_key()))
}

/// Combinations ranked by ascending cost/benefit ratio.
pub fn ordered_solutions(
    request: &RankRequest,
    catalog: &Catalog,
    averages: &[QosAverage],
) -> Result<Ranking, RankError> {
    rank(request, catalog, averages, SortOrder::Ratio)
}

/// The same candidate set as [`ordered_solutions`], ranked by total cost.
pub fn rank_by_cost_only(
    request: &RankRequest,
    catalog: &Catalog,
    averages: &[QosAverage],
) -> Result<Ranking, RankError> {
    rank(request, catalog, averages, SortOrder::Cost)
}

struct Candidate<'a, T> {
    offer: &'a T,
    key: OfferKey,
    cost: Decimal,
    qos: Option<QosTriple>,
}

impl<T> Candidate<'_, T> {
    fn site(&self) -> (&str, &str) {
        (&self.key.provider, &self.key.location)
    }
}

struct Pending<'a> {
    compute: Option<&'a Candidate<'a, ComputeOffer>>,
    storage: Option<&'a Candidate<'a, StorageOffer>>,
    network: &'a Candidate<'a, NetworkOffer>,
    cost: CostBreakdown,
    qos: EffectiveQos,
    values: CriterionValues,
}

/// Runs the full pipeline and sorts by `order`.
pub fn rank(
    request: &RankRequest,
    catalog: &Catalog,
    averages: &[QosAverage],
    order: SortOrder,
) -> Result<Ranking, RankError> {
    let (cost_weights, benefit_weights) = request.validate(catalog)?;
    let usage = &request.usage;
    let scope = request.scope();
    let index = QosIndex::new(averages);
    let mut estimator = Estimator::new(request, catalog, &index);
    let mut excluded = Vec::new();

    let mut lookup_qos = |key: &OfferKey, kind: ServiceKind, excluded: &mut Vec<Exclusion>| {
        let qkey = QosKey::new(&key.provider, &key.location, kind, &request.client_location);
        if let Some(avg) = index.get(&qkey) {
            return Some(QosTriple::from(avg));
        }
        if request.estimate_missing_qos {
            if let Some(t) = estimator.estimate(&key.location, kind) {
                return Some(t);
            }
        }
        excluded.push(Exclusion {
            subject: format!("{kind} {key}"),
            reason: format!("no QoS data from `{}`", request.client_location),
        });
        None
    };

    let mut computes = Vec::new();
    if usage.uses_compute() {
        for offer in catalog.filter_compute(&scope, request.min_memory_gb, request.max_memory_gb) {
            let key = offer.key();
            match pricing::compute_cost(offer, usage) {
                Ok(cost) => {
                    if let Some(qos) = lookup_qos(&key, ServiceKind::Compute, &mut excluded) {
                        computes.push(Candidate {
                            offer,
                            key,
                            cost,
                            qos: Some(qos),
                        });
                    }
                }
                Err(e) => excluded.push(Exclusion {
                    subject: format!("compute {key}"),
                    reason: e.to_string(),
                }),
            }
        }
    }

    let mut storages = Vec::new();
    if usage.uses_storage() {
        for offer in catalog.filter_storage(&scope, usage.storage_gb) {
            let key = offer.key();
            match pricing::storage_cost(offer, usage) {
                Ok(cost) => {
                    if let Some(qos) = lookup_qos(&key, ServiceKind::Storage, &mut excluded) {
                        storages.push(Candidate {
                            offer,
                            key,
                            cost,
                            qos: Some(qos),
                        });
                    }
                }
                Err(e) => excluded.push(Exclusion {
                    subject: format!("storage {key}"),
                    reason: e.to_string(),
                }),
            }
        }
    }

    let network_only = !usage.uses_compute() && !usage.uses_storage();
    let mut networks = Vec::new();
    for offer in catalog.filter_network(&scope, usage.data_in_gb, usage.data_out_gb) {
        let key = offer.key();
        match pricing::network_cost(offer, usage) {
            Ok(cost) => {
                let qos = if network_only {
                    let c = lookup_site(&index, &key, ServiceKind::Compute, request);
                    let s = lookup_site(&index, &key, ServiceKind::Storage, request);
                    let site = match (c, s) {
                        (Some(c), Some(s)) => Some(mean_triple(c, s)),
                        (c, s) => c.or(s),
                    };
                    let site = site.or_else(|| {
                        if request.estimate_missing_qos {
                            estimator
                                .estimate(&key.location, ServiceKind::Compute)
                                .or_else(|| estimator.estimate(&key.location, ServiceKind::Storage))
                        } else {
                            None
                        }
                    });
                    if site.is_none() {
                        excluded.push(Exclusion {
                            subject: format!("network {key}"),
                            reason: format!(
                                "no QoS data for its site from `{}`",
                                request.client_location
                            ),
                        });
                        continue;
                    }
                    site
                } else {
                    None
                };
                networks.push(Candidate {
                    offer,
                    key,
                    cost,
                    qos,
                });
            }
            Err(e) => excluded.push(Exclusion {
                subject: format!("network {key}"),
                reason: e.to_string(),
            }),
        }
    }

    let compute_opts: Vec<Option<&Candidate<ComputeOffer>>> = if usage.uses_compute() {
        computes.iter().map(Some).collect()
    } else {
        vec![None]
    };
    let storage_opts: Vec<Option<&Candidate<StorageOffer>>> = if usage.uses_storage() {
        storages.iter().map(Some).collect()
    } else {
        vec![None]
    };

    let instances = Decimal::from(usage.compute_instances);
    let mut pending = Vec::new();
    for &c in &compute_opts {
        for &s in &storage_opts {
            if request.single_provider {
                if let (Some(c), Some(s)) = (c, s) {
                    if c.site() != s.site() {
                        continue;
                    }
                }
            }
            for n in &networks {
                if request.single_provider {
                    let site = n.site();
                    if c.is_some_and(|c| c.site() != site) || s.is_some_and(|s| s.site() != site) {
                        continue;
                    }
                }
                let qos = match (c, s) {
                    (None, None) => {
                        let t = n.qos.expect("network-only candidates carry site QoS");
                        EffectiveQos {
                            latency_ms: t.latency_ms,
                            download_mbps: t.download_mbps,
                            upload_mbps: t.upload_mbps,
                            source: QosSource::NetworkSite,
                            estimated: t.estimated,
                        }
                    }
                    _ => combine_qos(c.and_then(|c| c.qos), s.and_then(|s| s.qos))
                        .expect("at least one kind present"),
                };
                let cost = CostBreakdown::new(
                    c.map_or(Decimal::ZERO, |c| c.cost),
                    s.map_or(Decimal::ZERO, |s| s.cost),
                    n.cost,
                );
                let (memory, disk) = c.map_or((0.0, 0.0), |c| {
                    (
                        to_f64(c.offer.memory_gb * instances),
                        to_f64(c.offer.disk_gb * instances),
                    )
                });
                let values = CriterionValues::new(&cost, &qos, memory, disk);
                pending.push(Pending {
                    compute: c,
                    storage: s,
                    network: n,
                    cost,
                    qos,
                    values,
                });
            }
        }
    }
    let evaluated = pending.len();

    if let Some(budget) = request.budget() {
        let before = pending.len();
        pending.retain(|p| p.cost.total <= budget);
        let dropped = before - pending.len();
        if dropped > 0 {
            excluded.push(Exclusion {
                subject: format!("{dropped} combination(s)"),
                reason: format!("total cost above price_max {budget}"),
            });
        }
    }

    if request.normalize {
        normalize(&mut pending, &cost_weights, &benefit_weights);
    }

    let scored: Vec<Result<ScoredCombination, Exclusion>> = pending
        .par_iter()
        .map(|p| {
            let compute = p.compute.map(|c| c.key.clone());
            let storage = p.storage.map(|s| s.key.clone());
            let network = p.network.key.clone();
            match score_values(&p.values, &cost_weights, &benefit_weights) {
                Ok(score) => Ok(ScoredCombination {
                    rank_position: 0,
                    compute,
                    storage,
                    network,
                    cost: p.cost.clone(),
                    qos: p.qos,
                    ratio: score.ratio,
                    score,
                }),
                Err(e) => Err(Exclusion {
                    subject: describe(compute.as_ref(), storage.as_ref(), &network),
                    reason: e.to_string(),
                }),
            }
        })
        .collect();

    let mut solutions = Vec::with_capacity(scored.len());
    for r in scored {
        match r {
            Ok(s) => solutions.push(s),
            Err(e) => excluded.push(e),
        }
    }

    match order {
        SortOrder::Ratio => solutions.par_sort_by(compare_by_ratio),
        SortOrder::Cost => solutions.par_sort_by(compare_by_cost),
    }
    for (i, s) in solutions.iter_mut().enumerate() {
        s.rank_position = i + 1;
    }
    excluded.sort();
    excluded.dedup();

    Ok(Ranking {
        solutions,
        excluded,
        evaluated,
    })
}

fn describe(c: Option<&OfferKey>, s: Option<&OfferKey>, n: &OfferKey) -> String {
    let mut parts = Vec::new();
    if let Some(c) = c {
        parts.push(format!("compute {c}"));
    }
    if let Some(s) = s {
        parts.push(format!("storage {s}"));
    }
    parts.push(format!("network {n}"));
    parts.join(" + ")
}

fn lookup_site(
    index: &QosIndex<'_>,
    key: &OfferKey,
    kind: ServiceKind,
    request: &RankRequest,
) -> Option<QosTriple> {
    let qkey = QosKey::new(&key.provider, &key.location, kind, &request.client_location);
    index.get(&qkey).map(QosTriple::from)
}

/// Divides each weighted criterion by its largest value across candidates.
fn normalize(pending: &mut [Pending<'_>], cost: &WeightVector, benefit: &WeightVector) {
    let names: HashSet<&str> = cost.criteria().iter().chain(benefit.criteria()).map(String::as_str).collect();
    for name in names {
        let max = pending
            .iter()
            .filter_map(|p| p.values.get(name))
            .fold(0.0_f64, f64::max);
        if max > 0.0 {
            for p in pending.iter_mut() {
                if let Some(v) = p.values.get_mut(name) {
                    *v /= max;
                }
            }
        }
    }
}

/// Distance-fit QoS estimates, cached per datacenter and service kind.
struct Estimator<'a> {
    catalog: &'a Catalog,
    index: &'a QosIndex<'a>,
    client: Option<&'a crate::catalog::Location>,
    cache: HashMap<(String, ServiceKind), Option<QosTriple>>,
}

impl<'a> Estimator<'a> {
    fn new(request: &RankRequest, catalog: &'a Catalog, index: &'a QosIndex<'a>) -> Self {
        Self {
            catalog,
            index,
            client: catalog.location(&request.client_location),
            cache: HashMap::new(),
        }
    }

    fn estimate(&mut self, datacenter: &str, kind: ServiceKind) -> Option<QosTriple> {
        if let Some(hit) = self.cache.get(&(datacenter.to_owned(), kind)) {
            return *hit;
        }
        let result = (|| {
            let client = self.client?;
            let dc = self.catalog.location(datacenter)?;
            let known: Vec<QosAverage> = self
                .index
                .all
                .iter()
                .filter(|a| a.key.service_kind == kind)
                .cloned()
                .collect();
            let locations = &self.catalog.locations;
            let latency = estimate_metric(client, dc, &known, locations, |a| a.mean_latency_ms)
                .value()?;
            let download =
                estimate_metric(client, dc, &known, locations, |a| a.mean_download_mbps).value()?;
            let upload =
                estimate_metric(client, dc, &known, locations, |a| a.mean_upload_mbps).value()?;
            Some(QosTriple {
                latency_ms: latency,
                download_mbps: download,
                upload_mbps: upload,
                estimated: true,
            })
        })();
        self.cache.insert((datacenter.to_owned(), kind), result);
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wv(pairs: &[(&str, f64)]) -> WeightVector {
        WeightVector::from_pairs(pairs.iter().copied()).unwrap()
    }

    fn qos(latency: f64, download: f64, upload: f64) -> EffectiveQos {
        EffectiveQos {
            latency_ms: latency,
            download_mbps: download,
            upload_mbps: upload,
            source: QosSource::Compute,
            estimated: false,
        }
    }

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    #[test]
    fn equal_weight_example() {
        let cost = CostBreakdown::new(d("4"), Decimal::ZERO, Decimal::ZERO);
        let s = score(
            &cost,
            &qos(2.0, 6.0, 2.0),
            &wv(&[("cost", 0.5), ("latency", 0.5)]),
            &wv(&[("upload", 0.5), ("download", 0.5)]),
            0.0,
            0.0,
        )
        .unwrap();
        assert_eq!(s.ratio, 0.75);
        assert_eq!(s.numerator, 3.0);
        assert_eq!(s.denominator, 4.0);
    }

    #[test]
    fn zero_benefit_is_an_error() {
        let cost = CostBreakdown::new(d("4"), Decimal::ZERO, Decimal::ZERO);
        let r = score(
            &cost,
            &qos(2.0, 6.0, 2.0),
            &wv(&[("cost", 1.0)]),
            &wv(&[("ram", 1.0)]),
            0.0,
            0.0,
        );
        assert_eq!(r, Err(ScoreError::ZeroDenominator));
    }

    #[test]
    fn two_kind_mean() {
        let c = QosTriple {
            latency_ms: 10.0,
            download_mbps: 10.0,
            upload_mbps: 4.0,
            estimated: false,
        };
        let s = QosTriple {
            latency_ms: 20.0,
            download_mbps: 6.0,
            upload_mbps: 2.0,
            estimated: true,
        };
        let q = combine_qos(Some(c), Some(s)).unwrap();
        assert_eq!(q.download_mbps, 8.0);
        assert_eq!(q.latency_ms, 15.0);
        assert_eq!(q.upload_mbps, 3.0);
        assert!(q.estimated);
        assert_eq!(q.source, QosSource::ComputeStorageMean);
        let only = combine_qos(Some(c), None).unwrap();
        assert_eq!(only.download_mbps, 10.0);
        assert_eq!(only.source, QosSource::Compute);
        assert!(combine_qos(None, None).is_none());
    }

    #[test]
    fn effective_qos_needs_every_requested_key() {
        let key = QosKey::new("p", "l", ServiceKind::Compute, "c");
        let other = QosKey::new("p", "l", ServiceKind::Storage, "c");
        let averages = vec![QosAverage {
            key: key.clone(),
            mean_latency_ms: 5.0,
            mean_download_mbps: 10.0,
            mean_upload_mbps: 2.0,
            sample_count: 1,
        }];
        let index = QosIndex::new(&averages);
        assert_eq!(effective_qos(Some(&key), None, &index).unwrap().download_mbps, 10.0);
        assert!(effective_qos(Some(&key), Some(&other), &index).is_none());
        assert!(effective_qos(None, None, &index).is_none());
    }

    #[test]
    fn request_defaults_from_json() {
        let r: RankRequest = serde_json::from_str(
            r#"{"client_location": "mel", "usage": {"storage_gb": 20, "data_out_gb": 50}, "min_memory_gb": 4}"#,
        )
        .unwrap();
        assert_eq!(r.price_max, Decimal::NEGATIVE_ONE);
        assert_eq!(r.cost_weights, default_cost_weights());
        assert_eq!(r.benefit_weights, default_benefit_weights());
        assert_eq!(r.min_memory_gb, d("4"));
        assert!(r.budget().is_none());
    }

    #[test]
    fn bad_weight_group_fails_to_parse() {
        let err = serde_json::from_str::<RankRequest>(
            r#"{"client_location": "mel", "cost_weights": {"criteria": ["cost", "latency"], "weights": [0.5, 0.4]}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("weights sum"), "{err}");
    }
}
