//! Distance-based estimates for client/datacenter pairs that have no
//! measurements of their own.

use serde::Serialize;

use super::sample::QosAverage;
use crate::catalog::Location;

const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Haversine distance between two locations.
pub fn great_circle_km(a: &Location, b: &Location) -> f64 {
    let (lat1, lon1) = (a.latitude.to_radians(), a.longitude.to_radians());
    let (lat2, lon2) = (b.latitude.to_radians(), b.longitude.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Ordinary least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    /// Fits the points; `None` unless at least two distinct `x` values exist.
    pub fn from_points(points: &[(f64, f64)]) -> Option<Self> {
        let n = points.len() as f64;
        if points.len() < 2 {
            return None;
        }
        let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
        if sxx <= f64::EPSILON * mean_x.abs().max(1.0) {
            return None;
        }
        let sxy: f64 = points
            .iter()
            .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
            .sum();
        let slope = sxy / sxx;
        Some(Self {
            slope,
            intercept: mean_y - slope * mean_x,
        })
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Estimate {
    /// Predicted from a distance fit, never a measured value.
    Estimated { value: f64, distance_km: f64 },
    NoEstimate,
}

impl Estimate {
    pub fn value(self) -> Option<f64> {
        match self {
            Estimate::Estimated { value, .. } => Some(value),
            Estimate::NoEstimate => None,
        }
    }
}

/// Fits `metric` of `known` against client-to-datacenter distance and
/// predicts it for `client` → `datacenter`, clamped below at the smallest
/// observed value. Averages whose locations are not in `locations` are
/// ignored.
pub fn estimate_metric(
    client: &Location,
    datacenter: &Location,
    known: &[QosAverage],
    locations: &[Location],
    metric: impl Fn(&QosAverage) -> f64,
) -> Estimate {
    let find = |id: &str| locations.iter().find(|l| l.id == id);
    let points: Vec<(f64, f64)> = known
        .iter()
        .filter_map(|avg| {
            let c = find(&avg.key.client_location)?;
            let d = find(&avg.key.datacenter_location)?;
            Some((great_circle_km(c, d), metric(avg)))
        })
        .collect();
    let Some(fit) = LinearFit::from_points(&points) else {
        return Estimate::NoEstimate;
    };
    let floor = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let distance_km = great_circle_km(client, datacenter);
    Estimate::Estimated {
        value: fit.predict(distance_km).max(floor),
        distance_km,
    }
}

pub fn estimate_latency_fallback(
    client: &Location,
    datacenter: &Location,
    known: &[QosAverage],
    locations: &[Location],
) -> Estimate {
    estimate_metric(client, datacenter, known, locations, |a| a.mean_latency_ms)
}
