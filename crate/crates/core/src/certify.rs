//! Optimality certificates and consistency checks across modules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DataTerm, IntegralField, SimplexField};
use crate::regularizer::{lambda_bounds, DlocConfig, LambdaBounds, RegularizerKind};
use crate::rounding::{threshold_two_class, IntegralEnergy, RoundingStats};
use crate::solver::primal_energy;

/// Relaxed energies at or below this are treated as zero.
pub const ZERO_ENERGY: f64 = 1e-14;

/// A priori factor `2 λ_u / λ_l`.
pub fn a_priori_factor(kind: &RegularizerKind, labels: usize) -> Result<f64> {
    Ok(lambda_bounds(kind, labels)?.factor())
}

/// A posteriori relative gap `ε' = (f(ū) − f_D(v)) / f_D(v)`.
pub fn a_posteriori_eps(f_rounded: f64, f_dual: f64) -> Result<f64> {
    if f_dual.is_nan() || f_dual <= 0.0 {
        return Err(Error::NonPositiveDual(f_dual));
    }
    Ok((f_rounded - f_dual) / f_dual)
}

/// One-sided statistical test of `E f(ū) ≤ factor · f(u)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub mean_f: f64,
    pub ci95_halfwidth: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub a_priori_factor: f64,
    pub lambda_l: f64,
    pub lambda_u: f64,
    pub f_relaxed: f64,
    /// Energy of the rounded labeling used for `eps_posteriori`
    /// (the Monte Carlo mean until [`Certificate::with_dual`] is applied).
    pub f_rounded: f64,
    pub f_dual: Option<f64>,
    pub eps_posteriori: Option<f64>,
    pub bound_check: BoundCheck,
    /// `f_relaxed` was zero, so the multiplicative bound degenerates to
    /// `E f(ū) = 0`.
    pub degenerate: bool,
    /// Constant added to every cost before certifying; the bound refers to
    /// the shifted objective.
    pub data_offset: f64,
}

impl Certificate {
    /// Adds the a posteriori part for a rounded energy and a dual value.
    pub fn with_dual(mut self, f_rounded: f64, f_dual: f64) -> Result<Self> {
        self.eps_posteriori = Some(a_posteriori_eps(f_rounded, f_dual)?);
        self.f_rounded = f_rounded;
        self.f_dual = Some(f_dual);
        Ok(self)
    }
}

/// Compares Monte Carlo statistics of rounded labelings against the
/// a priori bound applied to the relaxed energy.
///
/// The check passes when `mean_f − ci95 ≤ factor · f(u_relaxed)`.
pub fn check_bound(
    u_relaxed: &SimplexField,
    s: &DataTerm,
    kind: &RegularizerKind,
    stats: &RoundingStats,
    cfg: &DlocConfig,
) -> Result<Certificate> {
    let labels = u_relaxed.shape().labels();
    let LambdaBounds { lambda_l, lambda_u } = lambda_bounds(kind, labels)?;
    let factor = 2.0 * lambda_u / lambda_l;
    let f_relaxed = primal_energy(u_relaxed, s, kind, cfg)?.primal;
    let degenerate = f_relaxed <= ZERO_ENERGY;
    let rhs = factor * f_relaxed;
    let satisfied = if degenerate {
        stats.mean_f <= ZERO_ENERGY
    } else {
        stats.mean_f - stats.ci95_halfwidth <= rhs
    };
    Ok(Certificate {
        a_priori_factor: factor,
        lambda_l,
        lambda_u,
        f_relaxed,
        f_rounded: stats.mean_f,
        f_dual: None,
        eps_posteriori: None,
        bound_check: BoundCheck {
            mean_f: stats.mean_f,
            ci95_halfwidth: stats.ci95_halfwidth,
            rhs,
            satisfied,
        },
        degenerate,
        data_offset: 0.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoareaReport {
    pub n_alpha: usize,
    /// `f(u)`.
    pub lhs: f64,
    /// `(1/n) Σ_m f(ū_{α_m})` with midpoint nodes `α_m = (m − 1/2)/n`.
    pub rhs: f64,
    pub rel_dev: f64,
}

/// Compares `f(u)` with the average energy of its thresholdings.
///
/// `kind = None` evaluates the data term alone. The identity is exact up to
/// quadrature for the anisotropic metric regularizer and the data term.
pub fn coarea_check_two_class(
    u: &SimplexField,
    s: &DataTerm,
    kind: Option<&RegularizerKind>,
    n_alpha: usize,
    cfg: &DlocConfig,
) -> Result<CoareaReport> {
    let shape = u.shape();
    if shape.labels() != 2 {
        return Err(Error::NotTwoClass(shape.labels()));
    }
    if n_alpha == 0 {
        return Err(Error::Config("n_alpha must be >= 1".into()));
    }
    let data_only = RegularizerKind::potts();
    let energy = |field: &SimplexField| -> Result<f64> {
        Ok(match kind {
            Some(k) => primal_energy(field, s, k, cfg)?.primal,
            None => crate::grid::datacost(field, s)?,
        })
    };
    let lhs = energy(u)?;

    let table = IntegralEnergy::new(shape, kind.unwrap_or(&data_only), cfg)?;
    let mut values = Vec::with_capacity(n_alpha);
    for m in 0..n_alpha {
        let alpha = (m as f64 + 0.5) / n_alpha as f64;
        let labels = threshold_two_class(u, alpha)?;
        let (data, reg) = table.energy(&labels, s)?;
        values.push(if kind.is_some() { data + reg } else { data });
    }
    let rhs = crate::reduce::pairwise_mean(&values);
    let rel_dev = if lhs.abs() > ZERO_ENERGY {
        (lhs - rhs).abs() / lhs.abs()
    } else {
        (lhs - rhs).abs()
    };
    Ok(CoareaReport { n_alpha, lhs, rhs, rel_dev })
}

/// Largest number of labelings [`exhaustive_minimum`] will enumerate.
pub const EXHAUSTIVE_LIMIT: u64 = 1 << 22;

/// Global minimizer of the integral problem by enumerating all `l^N`
/// labelings; ties keep the first labeling in lexicographic order.
pub fn exhaustive_minimum(
    s: &DataTerm,
    kind: &RegularizerKind,
    cfg: &DlocConfig,
) -> Result<(IntegralField, f64)> {
    let shape = s.shape();
    let l = shape.labels() as u64;
    let n = shape.pixels() as u32;
    let count = l
        .checked_pow(n)
        .filter(|&c| c <= EXHAUSTIVE_LIMIT)
        .ok_or_else(|| Error::Config(format!("{l}^{n} labelings exceed the enumeration limit")))?;
    let table = IntegralEnergy::new(shape, kind, cfg)?;
    let mut labels = vec![0u32; shape.pixels()];
    let mut best: Option<(Vec<u32>, f64)> = None;
    for _ in 0..count {
        let field = IntegralField::new(shape, labels.clone())?;
        let (data, reg) = table.energy(&field, s)?;
        let f = data + reg;
        if best.as_ref().is_none_or(|(_, b)| f < *b) {
            best = Some((labels.clone(), f));
        }
        for slot in labels.iter_mut() {
            *slot += 1;
            if (*slot as u64) < l {
                break;
            }
            *slot = 0;
        }
    }
    let (labels, f) = best.expect("at least one labeling");
    Ok((IntegralField::new(shape, labels)?, f))
}
