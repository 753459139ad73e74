//! Criterion weights from pairwise importance judgments.
//!
//! Judgments use the odd-valued importance scale (equal 1, moderate 3,
//! strong 5, very strong 7, extreme 9) and its reciprocals. Weights are the
//! row sums of the reciprocal comparison matrix divided by the sum of all
//! row sums. Matrix squaring is kept only to measure how far that single
//! pass is from a refined estimate.

use std::collections::HashMap;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the reciprocal-symmetry and weight-sum invariants.
pub const TOLERANCE: f64 = 1e-9;

/// The accepted scale values, in increasing importance.
pub const SCALE: [f64; 5] = [1.0, 3.0, 5.0, 7.0, 9.0];

/// How close a submitted value must be to a scale value (or reciprocal) to
/// be accepted, so that `0.3333` is read as `1/3`.
const SCALE_SNAP: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AhpError {
    #[error("value {value} for ({a}, {b}) is not on the 1/3/5/7/9 scale or its reciprocals")]
    OffScale { a: String, b: String, value: f64 },
    #[error("criterion `{0}` compared with itself")]
    SelfComparison(String),
    #[error("pair ({0}, {1}) judged more than once")]
    DuplicatePair(String, String),
    #[error("missing judgment for pair ({0}, {1})")]
    MissingPair(String, String),
    #[error("unknown criterion `{0}`")]
    UnknownCriterion(String),
    #[error("at least two criteria are required")]
    TooFewCriteria,
    #[error("duplicate criterion `{0}`")]
    DuplicateCriterion(String),
    #[error("matrix is {rows}x{cols}, expected {n}x{n}")]
    Shape { rows: usize, cols: usize, n: usize },
    #[error("cell ({0}, {1}) must be positive and finite")]
    NonPositive(usize, usize),
    #[error("diagonal cell ({0}, {0}) must be 1")]
    Diagonal(usize),
    #[error("cells ({0}, {1}) and ({1}, {0}) are not reciprocal")]
    NotReciprocal(usize, usize),
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("weight {1} for `{0}` is outside [0, 1]")]
    WeightRange(String, f64),
    #[error("{0} criteria but {1} weights")]
    Length(usize, usize),
}

/// A submitted scale value, as a number or a fraction string like `"1/5"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ScaleValue(pub f64);

impl<'de> Deserialize<'de> for ScaleValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ScaleValue;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a fraction such as \"1/3\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ScaleValue, E> {
                Ok(ScaleValue(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ScaleValue, E> {
                Ok(ScaleValue(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ScaleValue, E> {
                Ok(ScaleValue(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ScaleValue, E> {
                let parse = |s: &str| s.trim().parse::<f64>().map_err(E::custom);
                match v.split_once('/') {
                    Some((num, den)) => Ok(ScaleValue(parse(num)? / parse(den)?)),
                    None => parse(v).map(ScaleValue),
                }
            }
        }
        deserializer.deserialize_any(V)
    }
}

/// "`criterion_a` is `value` times as important as `criterion_b`".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub criterion_a: String,
    pub criterion_b: String,
    pub value: ScaleValue,
}

impl Judgment {
    pub fn new(a: impl Into<String>, b: impl Into<String>, value: f64) -> Self {
        Self {
            criterion_a: a.into(),
            criterion_b: b.into(),
            value: ScaleValue(value),
        }
    }
}

/// Snaps `value` to the exact scale value or reciprocal it denotes.
pub fn snap_to_scale(value: f64) -> Option<f64> {
    if !value.is_finite() || value <= 0.0 {
        return None;
    }
    SCALE
        .iter()
        .flat_map(|&s| [s, 1.0 / s])
        .find(|&s| (value - s).abs() <= SCALE_SNAP)
}

/// A reciprocal pairwise comparison matrix over named criteria.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonMatrix {
    criteria: Vec<String>,
    cells: Vec<Vec<f64>>,
}

impl ComparisonMatrix {
    /// Builds the matrix from one judgment per unordered pair. Criteria are
    /// ordered by first appearance.
    pub fn from_judgments(judgments: &[Judgment]) -> Result<Self, AhpError> {
        let mut criteria: Vec<String> = Vec::new();
        for j in judgments {
            for c in [&j.criterion_a, &j.criterion_b] {
                if !criteria.contains(c) {
                    criteria.push(c.clone());
                }
            }
        }
        Self::from_judgments_ordered(criteria, judgments)
    }

    /// Builds the matrix over `criteria`, in that order.
    pub fn from_judgments_ordered(
        criteria: Vec<String>,
        judgments: &[Judgment],
    ) -> Result<Self, AhpError> {
        let n = criteria.len();
        if n < 2 {
            return Err(AhpError::TooFewCriteria);
        }
        let index: HashMap<&str, usize> = criteria
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        if index.len() != n {
            let dup = criteria
                .iter()
                .enumerate()
                .find(|(i, c)| criteria[..*i].contains(c))
                .map(|(_, c)| c.clone())
                .unwrap_or_default();
            return Err(AhpError::DuplicateCriterion(dup));
        }

        let mut cells: Vec<Vec<Option<f64>>> = vec![vec![None; n]; n];
        for j in judgments {
            let (a, b) = (&j.criterion_a, &j.criterion_b);
            let i = *index
                .get(a.as_str())
                .ok_or_else(|| AhpError::UnknownCriterion(a.clone()))?;
            let k = *index
                .get(b.as_str())
                .ok_or_else(|| AhpError::UnknownCriterion(b.clone()))?;
            if i == k {
                return Err(AhpError::SelfComparison(a.clone()));
            }
            if cells[i][k].is_some() {
                return Err(AhpError::DuplicatePair(a.clone(), b.clone()));
            }
            let value = snap_to_scale(j.value.0).ok_or_else(|| AhpError::OffScale {
                a: a.clone(),
                b: b.clone(),
                value: j.value.0,
            })?;
            cells[i][k] = Some(value);
            cells[k][i] = Some(1.0 / value);
        }

        let mut out = vec![vec![1.0; n]; n];
        for i in 0..n {
            for k in (i + 1)..n {
                match cells[i][k] {
                    Some(v) => {
                        out[i][k] = v;
                        out[k][i] = cells[k][i].expect("reciprocal filled with its pair");
                    }
                    None => {
                        return Err(AhpError::MissingPair(
                            criteria[i].clone(),
                            criteria[k].clone(),
                        ))
                    }
                }
            }
        }
        Ok(Self {
            criteria,
            cells: out,
        })
    }

    /// Wraps explicit cells, checking every matrix invariant.
    pub fn new(criteria: Vec<String>, cells: Vec<Vec<f64>>) -> Result<Self, AhpError> {
        let n = criteria.len();
        if n < 2 {
            return Err(AhpError::TooFewCriteria);
        }
        for (i, c) in criteria.iter().enumerate() {
            if criteria[..i].contains(c) {
                return Err(AhpError::DuplicateCriterion(c.clone()));
            }
        }
        if cells.len() != n || cells.iter().any(|r| r.len() != n) {
            return Err(AhpError::Shape {
                rows: cells.len(),
                cols: cells.iter().map(Vec::len).max().unwrap_or(0),
                n,
            });
        }
        for i in 0..n {
            for k in 0..n {
                let v = cells[i][k];
                if !(v.is_finite() && v > 0.0) {
                    return Err(AhpError::NonPositive(i, k));
                }
            }
            if (cells[i][i] - 1.0).abs() > TOLERANCE {
                return Err(AhpError::Diagonal(i));
            }
            for k in (i + 1)..n {
                if (cells[k][i] - 1.0 / cells[i][k]).abs() > TOLERANCE {
                    return Err(AhpError::NotReciprocal(i, k));
                }
            }
        }
        Ok(Self { criteria, cells })
    }

    /// All-ones matrix: every criterion equally important.
    pub fn indifferent(criteria: Vec<String>) -> Result<Self, AhpError> {
        let n = criteria.len();
        Self::new(criteria, vec![vec![1.0; n]; n])
    }

    pub fn criteria(&self) -> &[String] {
        &self.criteria
    }

    pub fn cells(&self) -> &[Vec<f64>] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.criteria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.criteria.is_empty()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        row_sums(&self.cells)
    }

    pub fn weights(&self) -> WeightVector {
        compute_weights(self)
    }
}

/// Named criterion weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWeights")]
pub struct WeightVector {
    criteria: Vec<String>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawWeights {
    criteria: Vec<String>,
    weights: Vec<f64>,
}

impl TryFrom<RawWeights> for WeightVector {
    type Error = AhpError;

    fn try_from(raw: RawWeights) -> Result<Self, Self::Error> {
        WeightVector::new(raw.criteria, raw.weights)
    }
}

impl WeightVector {
    pub fn new(criteria: Vec<String>, weights: Vec<f64>) -> Result<Self, AhpError> {
        if criteria.len() != weights.len() {
            return Err(AhpError::Length(criteria.len(), weights.len()));
        }
        for (i, c) in criteria.iter().enumerate() {
            if criteria[..i].contains(c) {
                return Err(AhpError::DuplicateCriterion(c.clone()));
            }
        }
        for (c, &w) in criteria.iter().zip(&weights) {
            if !(0.0..=1.0).contains(&w) {
                return Err(AhpError::WeightRange(c.clone(), w));
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > TOLERANCE {
            return Err(AhpError::WeightSum(sum));
        }
        Ok(Self { criteria, weights })
    }

    /// Builds from `(criterion, weight)` pairs.
    pub fn from_pairs<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<Self, AhpError> {
        let (criteria, weights) = pairs.into_iter().map(|(c, w)| (c.into(), w)).unzip();
        Self::new(criteria, weights)
    }

    pub fn criteria(&self) -> &[String] {
        &self.criteria
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, criterion: &str) -> Option<f64> {
        self.criteria
            .iter()
            .position(|c| c == criterion)
            .map(|i| self.weights[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.criteria
            .iter()
            .map(String::as_str)
            .zip(self.weights.iter().copied())
    }
}

fn row_sums(cells: &[Vec<f64>]) -> Vec<f64> {
    cells.iter().map(|row| row.iter().sum()).collect()
}

/// Row sums normalized by their total.
pub fn weights_from(cells: &[Vec<f64>]) -> Vec<f64> {
    let sums = row_sums(cells);
    let total: f64 = sums.iter().sum();
    sums.iter().map(|s| s / total).collect()
}

pub fn compute_weights(m: &ComparisonMatrix) -> WeightVector {
    WeightVector {
        criteria: m.criteria.clone(),
        weights: weights_from(&m.cells),
    }
}

/// The product `m × m`. The result is positive but no longer reciprocal.
pub fn square_matrix(m: &ComparisonMatrix) -> Vec<Vec<f64>> {
    let n = m.len();
    let c = &m.cells;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).map(|k| c[i][k] * c[k][j]).sum())
                .collect()
        })
        .collect()
}

/// Largest absolute change in any weight after one squaring step.
pub fn convergence_gap(m: &ComparisonMatrix) -> f64 {
    let before = weights_from(&m.cells);
    let after = weights_from(&square_matrix(m));
    before
        .iter()
        .zip(&after)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
