//! Label distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A broken metric axiom. Indices are zero-based label indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricViolation {
    NotSquare { len: usize, size: usize },
    NonFinite { i: usize, j: usize },
    NonZeroDiagonal { i: usize },
    Asymmetric { i: usize, j: usize },
    NonPositive { i: usize, j: usize },
    /// `d(i, k) > d(i, j) + d(j, k)`.
    Triangle { i: usize, j: usize, k: usize },
}

/// Checks the metric axioms on a row-major `size × size` matrix.
///
/// Returns every violation found; an empty list means `entries` is a metric.
pub fn validate_metric(size: usize, entries: &[f64]) -> Vec<MetricViolation> {
    if entries.len() != size * size {
        return vec![MetricViolation::NotSquare { len: entries.len(), size }];
    }
    let d = |i: usize, j: usize| entries[i * size + j];
    let mut out = Vec::new();
    for i in 0..size {
        for j in 0..size {
            if !d(i, j).is_finite() {
                out.push(MetricViolation::NonFinite { i, j });
            }
        }
    }
    if !out.is_empty() {
        return out;
    }
    for i in 0..size {
        if d(i, i) != 0.0 {
            out.push(MetricViolation::NonZeroDiagonal { i });
        }
        for j in i + 1..size {
            if d(i, j) != d(j, i) {
                out.push(MetricViolation::Asymmetric { i, j });
            }
            if d(i, j) <= 0.0 || d(j, i) <= 0.0 {
                out.push(MetricViolation::NonPositive { i, j });
            }
        }
    }
    for i in 0..size {
        for j in 0..size {
            for k in 0..size {
                if i == k || j == i || j == k {
                    continue;
                }
                if d(i, k) > d(i, j) + d(j, k) {
                    out.push(MetricViolation::Triangle { i, j, k });
                }
            }
        }
    }
    out
}

/// A validated `l × l` label metric.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metric {
    size: usize,
    entries: Vec<f64>,
}

impl Metric {
    pub fn new(size: usize, entries: Vec<f64>) -> Result<Self> {
        let violations = validate_metric(size, &entries);
        if !violations.is_empty() {
            return Err(Error::InvalidMetric(violations));
        }
        if size < 2 {
            return Err(Error::Shape(format!("metric needs at least 2 labels, got {size}")));
        }
        Ok(Self { size, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::InvalidMetric(vec![MetricViolation::NotSquare {
                len: rows.iter().map(Vec::len).sum(),
                size,
            }]));
        }
        Self::new(size, rows.concat())
    }

    /// Potts metric `d(i, j) = 1 - δ_ij`.
    pub fn uniform(size: usize) -> Self {
        Self::scaled_uniform(size, 1.0)
    }

    pub fn scaled_uniform(size: usize, weight: f64) -> Self {
        let entries = (0..size * size)
            .map(|n| if n / size == n % size { 0.0 } else { weight })
            .collect();
        Self { size, entries }
    }

    /// `d(i, j) = |i - j|` truncated at `cap`.
    pub fn truncated_linear(size: usize, cap: f64) -> Result<Self> {
        let entries = (0..size * size)
            .map(|n| ((n / size).abs_diff(n % size) as f64).min(cap))
            .collect();
        Self::new(size, entries)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.size).map(<[f64]>::to_vec).collect()
    }

    pub fn min_distance(&self) -> f64 {
        self.off_diagonal().fold(f64::INFINITY, f64::min)
    }

    pub fn max_distance(&self) -> f64 {
        self.off_diagonal().fold(0.0, f64::max)
    }

    fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let n = self.size;
        self.entries
            .iter()
            .enumerate()
            .filter(move |(k, _)| k / n != k % n)
            .map(|(_, &v)| v)
    }
}
