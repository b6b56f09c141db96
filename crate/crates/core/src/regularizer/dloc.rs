//! Projection onto the local dual constraint set
//!
//! ```text
//!   D_loc = { v = (v^1, …, v^l) ∈ R^{dim×l} : ‖v^i − v^j‖₂ ≤ d(i, j),  Σ_k v^k = 0 }
//! ```
//!
//! by Dykstra's alternating projection. Blocks are row-major `dim × l`
//! slices, so column `i` of `v` is `(v[i], v[l + i], …)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Metric;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DlocConfig {
    pub max_sweeps: usize,
    /// Stop once max constraint violation plus iterate movement per sweep
    /// falls below this.
    pub tol: f64,
}

impl Default for DlocConfig {
    fn default() -> Self {
        Self { max_sweeps: 200, tol: 1e-10 }
    }
}

impl DlocConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_sweeps == 0 {
            return Err(Error::Config("dloc max_sweeps must be >= 1".into()));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Config(format!("dloc tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Outcome of one projection. The returned point is always feasible;
/// `residual` is the violation plus movement of the last Dykstra sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DlocOutcome {
    pub converged: bool,
    pub sweeps: usize,
    pub residual: f64,
}

/// Projects `v` (a `dim × l` block) onto `D_loc` for `metric`.
///
/// Dykstra cycles over the pairwise constraints in lexicographic order and
/// finishes each sweep with the sum-zero hyperplane. Since `0 ∈ D_loc`, the
/// final iterate is additionally re-centered and radially scaled into the
/// set, so the output is feasible even when the sweep budget runs out.
pub fn project_dloc(
    v: &[f64],
    dim: usize,
    metric: &Metric,
    cfg: &DlocConfig,
) -> Result<(Vec<f64>, DlocOutcome)> {
    let l = metric.size();
    if dim == 0 || v.len() != dim * l {
        return Err(Error::ShapeMismatch(format!(
            "dloc block of {} values for dim {dim} and {l} labels",
            v.len()
        )));
    }
    if let Some(index) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut out = v.to_vec();
    let mut scratch = Vec::new();
    let outcome = project_dloc_in_place(&mut out, dim, metric, cfg, &mut scratch);
    Ok((out, outcome))
}

pub(crate) fn project_dloc_in_place(
    v: &mut [f64],
    dim: usize,
    metric: &Metric,
    cfg: &DlocConfig,
    increments: &mut Vec<f64>,
) -> DlocOutcome {
    let l = metric.size();
    let pairs = l * (l - 1) / 2;
    increments.clear();
    increments.resize(pairs * 2 * dim, 0.0);

    let mut a = [0.0f64; 8];
    let mut b = [0.0f64; 8];
    assert!(dim <= a.len(), "spatial dimension {dim} not supported");

    let mut outcome = DlocOutcome { converged: false, sweeps: 0, residual: f64::INFINITY };
    for sweep in 1..=cfg.max_sweeps {
        let mut movement = 0.0f64;
        let mut p = 0;
        for i in 0..l {
            for j in i + 1..l {
                let inc = &mut increments[p * 2 * dim..(p + 1) * 2 * dim];
                p += 1;
                for k in 0..dim {
                    a[k] = v[k * l + i] + inc[k];
                    b[k] = v[k * l + j] + inc[dim + k];
                }
                let radius = metric.get(i, j);
                let dist = norm(&a[..dim], &b[..dim]);
                for k in 0..dim {
                    let (na, nb) = if dist > radius {
                        let mid = 0.5 * (a[k] + b[k]);
                        let half = 0.5 * (a[k] - b[k]) * radius / dist;
                        (mid + half, mid - half)
                    } else {
                        (a[k], b[k])
                    };
                    inc[k] = a[k] - na;
                    inc[dim + k] = b[k] - nb;
                    movement = movement
                        .max((na - v[k * l + i]).abs())
                        .max((nb - v[k * l + j]).abs());
                    v[k * l + i] = na;
                    v[k * l + j] = nb;
                }
            }
        }
        // The hyperplane is a subspace: its Dykstra increment is orthogonal
        // to it and drops out of the projection.
        movement = movement.max(center_rows(v, dim, l));
        let residual = movement + pair_violation(v, dim, metric);
        outcome = DlocOutcome { converged: residual <= cfg.tol, sweeps: sweep, residual };
        if outcome.converged {
            break;
        }
    }
    make_feasible(v, dim, metric);
    outcome
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Subtracts the row mean; returns the largest change.
fn center_rows(v: &mut [f64], dim: usize, l: usize) -> f64 {
    let mut change = 0.0f64;
    for k in 0..dim {
        let row = &mut v[k * l..(k + 1) * l];
        let mean = row.iter().sum::<f64>() / l as f64;
        for x in row.iter_mut() {
            *x -= mean;
        }
        change = change.max(mean.abs());
    }
    change
}

/// Largest excess `‖v^i − v^j‖ − d(i, j)` over all pairs (0 if feasible).
pub(crate) fn pair_violation(v: &[f64], dim: usize, metric: &Metric) -> f64 {
    let l = metric.size();
    let mut worst = 0.0f64;
    for i in 0..l {
        for j in i + 1..l {
            worst = worst.max(column_distance(v, dim, l, i, j) - metric.get(i, j));
        }
    }
    worst
}

/// Largest absolute row sum.
pub(crate) fn sum_violation(v: &[f64], dim: usize, l: usize) -> f64 {
    (0..dim)
        .map(|k| v[k * l..(k + 1) * l].iter().sum::<f64>().abs())
        .fold(0.0, f64::max)
}

fn column_distance(v: &[f64], dim: usize, l: usize, i: usize, j: usize) -> f64 {
    (0..dim)
        .map(|k| {
            let d = v[k * l + i] - v[k * l + j];
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Re-centers `v` and shrinks it toward 0 until every pairwise constraint holds.
pub(crate) fn make_feasible(v: &mut [f64], dim: usize, metric: &Metric) {
    let l = metric.size();
    center_rows(v, dim, l);
    let mut scale = 1.0f64;
    for i in 0..l {
        for j in i + 1..l {
            let dist = column_distance(v, dim, l, i, j);
            let radius = metric.get(i, j);
            if dist > radius {
                // Bias slightly inward so rounding cannot push it back out.
                scale = scale.min(radius / dist * (1.0 - 4.0 * f64::EPSILON));
            }
        }
    }
    if scale < 1.0 {
        for x in v.iter_mut() {
            *x *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_stays_zero() {
        let m = Metric::uniform(3);
        let (p, out) = project_dloc(&[0.0; 6], 2, &m, &DlocConfig::default()).unwrap();
        assert_eq!(p, vec![0.0; 6]);
        assert!(out.converged);
        assert_eq!(out.sweeps, 1);
    }

    #[test]
    fn two_label_example() {
        // v¹ = (2, 0), v² = (−2, 0); row-major: x-row then y-row.
        let m = Metric::uniform(2);
        let v = [2.0, -2.0, 0.0, 0.0];
        let (p, out) = project_dloc(&v, 2, &m, &DlocConfig::default()).unwrap();
        assert!(out.converged);
        let expect = [0.5, -0.5, 0.0, 0.0];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn feasible_points_are_fixed() {
        let m = Metric::truncated_linear(3, 2.0).unwrap();
        let v = [0.3, -0.1, -0.2, 0.1, 0.05, -0.15];
        assert_eq!(pair_violation(&v, 2, &m), 0.0);
        let (p, _) = project_dloc(&v, 2, &m, &DlocConfig::default()).unwrap();
        for (a, b) in p.iter().zip(v) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn budget_exhaustion_still_feasible() {
        let m = Metric::truncated_linear(4, 2.0).unwrap();
        let v = [5.0, -3.0, 1.0, 4.0, -2.0, 7.0, 0.5, -6.0];
        let cfg = DlocConfig { max_sweeps: 1, tol: 1e-14 };
        let (p, out) = project_dloc(&v, 2, &m, &cfg).unwrap();
        assert!(!out.converged);
        assert!(pair_violation(&p, 2, &m) <= 0.0);
        assert!(sum_violation(&p, 2, 4) < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let m = Metric::uniform(2);
        let cfg = DlocConfig::default();
        assert!(project_dloc(&[0.0; 3], 2, &m, &cfg).is_err());
        assert!(project_dloc(&[f64::NAN, 0.0, 0.0, 0.0], 2, &m, &cfg).is_err());
        assert!(DlocConfig { max_sweeps: 0, tol: 1.0 }.validate().is_err());
        assert!(DlocConfig { max_sweeps: 1, tol: 0.0 }.validate().is_err());
    }
}
