use std::time::SystemTime;

use qosrank::catalog::Catalog;
use qosrank::qos::QosAverage;
use qosrank::ranking::{rank, RankError, RankRequest, ScoredCombination, SortOrder};
use serde::{Deserialize, Serialize};

pub const DEFAULT_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Page {
    pub limit: usize,
    pub offset: usize,
}

impl Default for Page {
    fn default() -> Self {
        Self {
            limit: DEFAULT_LIMIT,
            offset: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResponse {
    pub request_echo: RankRequest,
    pub order: SortOrder,
    /// Ranked combinations in this page.
    pub results: Vec<ScoredCombination>,
    /// Ranked combinations across all pages.
    pub total_results: usize,
    pub evaluated: usize,
    pub offset: usize,
    pub catalog_version: u64,
    pub generated_at: String,
}

/// Ranks `request` against one catalog snapshot and cuts out one page.
pub fn rank_response(
    request: RankRequest,
    catalog: &Catalog,
    averages: &[QosAverage],
    order: SortOrder,
    page: Page,
) -> Result<RankResponse, RankError> {
    let ranking = rank(&request, catalog, averages, order)?;
    let total_results = ranking.solutions.len();
    let results = ranking
        .solutions
        .into_iter()
        .skip(page.offset)
        .take(page.limit)
        .collect();
    Ok(RankResponse {
        request_echo: request,
        order,
        results,
        total_results,
        evaluated: ranking.evaluated,
        offset: page.offset,
        catalog_version: catalog.version,
        generated_at: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
    })
}
