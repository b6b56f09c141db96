//! Convex, positively homogeneous regularizers `Ψ` on per-pixel gradients.
//!
//! Three variants are supported:
//!
//! * [`RegularizerKind::PottsFrobenius`]: `Ψ(z) = w ‖z‖_F`. With `w = 1/√2`
//!   an interface between two labels costs its length.
//! * [`RegularizerKind::MetricEnvelope`]: the support function of `D_loc`
//!   for a label metric `d`, charging `d(i, j)` per unit length of an
//!   `i`–`j` interface.
//! * [`RegularizerKind::AnisoMetricL1`]: the one-dimensional envelope applied
//!   to each spatial row separately. On a grid this is levelable, which makes
//!   the two-class coarea identity exact.

mod dloc;

pub use dloc::{project_dloc, DlocConfig, DlocOutcome};

pub(crate) use dloc::{make_feasible, pair_violation, project_dloc_in_place, sum_violation};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GradientField, DIM};
use crate::metric::Metric;
use crate::reduce::pairwise_sum;

/// Iteration cap of the envelope ascent.
pub const ASCENT_MAX_ITERS: usize = 5000;
/// Relative objective change that stops the envelope ascent.
pub const ASCENT_REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum RegularizerKind {
    PottsFrobenius { weight: f64 },
    MetricEnvelope { metric: Metric },
    AnisoMetricL1 { metric: Metric },
}

impl RegularizerKind {
    /// Potts regularizer whose two-label interfaces cost their length.
    pub fn potts() -> Self {
        Self::PottsFrobenius { weight: std::f64::consts::FRAC_1_SQRT_2 }
    }

    pub fn potts_weighted(weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::Config(format!("Potts weight must be finite and > 0, got {weight}")));
        }
        Ok(Self::PottsFrobenius { weight })
    }

    pub fn metric(&self) -> Option<&Metric> {
        match self {
            Self::PottsFrobenius { .. } => None,
            Self::MetricEnvelope { metric } | Self::AnisoMetricL1 { metric } => Some(metric),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::PottsFrobenius { .. } => "potts_frobenius",
            Self::MetricEnvelope { .. } => "metric_envelope",
            Self::AnisoMetricL1 { .. } => "aniso_metric_l1",
        }
    }

    /// Fails if the kind carries a metric of the wrong size.
    pub fn check_labels(&self, labels: usize) -> Result<()> {
        match self.metric() {
            Some(m) if m.size() != labels => Err(Error::ShapeMismatch(format!(
                "metric has {} labels, problem has {labels}",
                m.size()
            ))),
            _ => Ok(()),
        }
    }
}

/// Value of `Ψ(z)`. For the envelope variants `value` never exceeds the
/// true supremum and `residual` bounds the shortfall.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiValue {
    pub value: f64,
    pub residual: f64,
    pub converged: bool,
}

impl PsiValue {
    fn exact(value: f64) -> Self {
        Self { value, residual: 0.0, converged: true }
    }
}

/// Evaluates `Ψ` on one `DIM × l` block.
pub fn psi_eval(kind: &RegularizerKind, z: &[f64], cfg: &DlocConfig) -> Result<PsiValue> {
    if !z.len().is_multiple_of(DIM) || z.len() < DIM * 2 {
        return Err(Error::ShapeMismatch(format!("Ψ argument with {} entries", z.len())));
    }
    kind.check_labels(z.len() / DIM)?;
    if let Some(index) = z.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(psi_unchecked(kind, z, cfg))
}

pub(crate) fn psi_unchecked(kind: &RegularizerKind, z: &[f64], cfg: &DlocConfig) -> PsiValue {
    match kind {
        RegularizerKind::PottsFrobenius { weight } => PsiValue::exact(weight * frobenius(z)),
        RegularizerKind::MetricEnvelope { metric } => envelope(z, DIM, metric, cfg),
        RegularizerKind::AnisoMetricL1 { metric } => {
            let l = metric.size();
            let mut total = PsiValue::exact(0.0);
            for row in z.chunks_exact(l) {
                let r = envelope(row, 1, metric, cfg);
                total.value += r.value;
                total.residual += r.residual;
                total.converged &= r.converged;
            }
            total
        }
    }
}

fn frobenius(z: &[f64]) -> f64 {
    z.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sup_{v ∈ D_loc} <z, v>` by projected gradient ascent with unit-length
/// steps, started from the projection of `λ_u z/‖z‖`.
///
/// For a step `v⁺ = P(v + ηz)` and any feasible `w`,
/// `η <z, w − v⁺> ≤ ‖v⁺ − v‖ diam(D_loc)`, which gives the reported
/// residual with `diam(D_loc) ≤ 2 √l max d`.
fn envelope(z: &[f64], dim: usize, metric: &Metric, cfg: &DlocConfig) -> PsiValue {
    let l = metric.size();
    let nz = frobenius(z);
    if nz == 0.0 {
        return PsiValue::exact(0.0);
    }
    let step = 1.0 / nz;
    let diameter = 2.0 * (l as f64).sqrt() * metric.max_distance();

    let mut scratch = Vec::new();
    let mut v: Vec<f64> = z.iter().map(|x| x * metric.max_distance() * step).collect();
    let mut converged = project_dloc_in_place(&mut v, dim, metric, cfg, &mut scratch).converged;
    let mut objective = dot(z, &v);
    let mut next = vec![0.0; v.len()];
    let mut residual = f64::INFINITY;

    for _ in 0..ASCENT_MAX_ITERS {
        for ((n, a), b) in next.iter_mut().zip(&v).zip(z) {
            *n = a + step * b;
        }
        converged &= project_dloc_in_place(&mut next, dim, metric, cfg, &mut scratch).converged;
        let movement = frobenius_diff(&next, &v);
        let updated = dot(z, &next);
        residual = movement * diameter * nz;
        std::mem::swap(&mut v, &mut next);
        let change = (updated - objective).abs();
        objective = updated;
        if change <= ASCENT_REL_TOL * objective.abs().max(f64::MIN_POSITIVE) {
            return PsiValue { value: objective.max(0.0), residual, converged };
        }
    }
    PsiValue { value: objective.max(0.0), residual, converged: false }
}

fn frobenius_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Constants of the lower and upper boundedness conditions on `Ψ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LambdaBounds {
    pub lambda_l: f64,
    pub lambda_u: f64,
}

impl LambdaBounds {
    /// A priori approximation factor `2 λ_u / λ_l`.
    pub fn factor(&self) -> f64 {
        2.0 * self.lambda_u / self.lambda_l
    }
}

/// Valid `(λ_l, λ_u)` for `kind` on problems with `labels` classes.
///
/// * Potts: `λ_u = w√2` (unit jumps), `λ_l = w√2/√l` (Cauchy–Schwarz).
/// * Metric envelope: `(min_{i≠j} d, max d)`.
/// * Anisotropic: `λ_l = min d`; a unit jump with normal `ν` costs
///   `d(i, j) ‖ν‖₁ ≤ √2 d(i, j)`, so `λ_u = √2 max d`.
pub fn lambda_bounds(kind: &RegularizerKind, labels: usize) -> Result<LambdaBounds> {
    kind.check_labels(labels)?;
    if labels < 2 {
        return Err(Error::Shape(format!("need at least 2 labels, got {labels}")));
    }
    let bounds = match kind {
        RegularizerKind::PottsFrobenius { weight } => {
            let upper = weight * std::f64::consts::SQRT_2;
            LambdaBounds { lambda_l: upper / (labels as f64).sqrt(), lambda_u: upper }
        }
        RegularizerKind::MetricEnvelope { metric } => {
            LambdaBounds { lambda_l: metric.min_distance(), lambda_u: metric.max_distance() }
        }
        RegularizerKind::AnisoMetricL1 { metric } => LambdaBounds {
            lambda_l: metric.min_distance(),
            lambda_u: std::f64::consts::SQRT_2 * metric.max_distance(),
        },
    };
    Ok(bounds)
}

/// Regularizer energy of a whole field with convergence bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegEnergy {
    pub value: f64,
    /// Number of pixels whose `Ψ` evaluation hit an iteration budget.
    pub unconverged: usize,
    /// Sum of per-pixel residuals, scaled like `value`.
    pub residual: f64,
}

/// `h² Σ_x Ψ(g(x))` for a gradient field scaled by `1/h`, which equals
/// `h Σ_x Ψ(z_x)` for the unscaled forward differences `z_x`.
pub fn total_reg_energy(
    kind: &RegularizerKind,
    g: &GradientField,
    cfg: &DlocConfig,
) -> Result<RegEnergy> {
    let shape = g.shape();
    kind.check_labels(shape.labels())?;
    let n = g.block_len();
    let values: Vec<PsiValue> = g
        .values()
        .par_chunks_exact(n)
        .map(|z| psi_unchecked(kind, z, cfg))
        .collect();
    let area = shape.cell_area();
    let terms: Vec<f64> = values.iter().map(|p| p.value).collect();
    let residuals: Vec<f64> = values.iter().map(|p| p.residual).collect();
    Ok(RegEnergy {
        value: pairwise_sum(&terms) * area,
        unconverged: values.iter().filter(|p| !p.converged).count(),
        residual: pairwise_sum(&residuals) * area,
    })
}

/// Projects one `DIM × l` dual block onto the dual set of `kind`.
/// Returns whether the inner projection converged.
pub(crate) fn project_dual_block(
    kind: &RegularizerKind,
    block: &mut [f64],
    cfg: &DlocConfig,
    scratch: &mut Vec<f64>,
) -> bool {
    match kind {
        RegularizerKind::PottsFrobenius { weight } => {
            let n = frobenius(block);
            if n > *weight {
                let scale = weight / n * (1.0 - 4.0 * f64::EPSILON);
                block.iter_mut().for_each(|x| *x *= scale);
            }
            true
        }
        RegularizerKind::MetricEnvelope { metric } => {
            project_dloc_in_place(block, DIM, metric, cfg, scratch).converged
        }
        RegularizerKind::AnisoMetricL1 { metric } => {
            let mut ok = true;
            for row in block.chunks_exact_mut(metric.size()) {
                ok &= project_dloc_in_place(row, 1, metric, cfg, scratch).converged;
            }
            ok
        }
    }
}

/// Largest violation of the dual constraints of `kind` by one block.
pub fn dual_block_violation(kind: &RegularizerKind, block: &[f64]) -> f64 {
    match kind {
        RegularizerKind::PottsFrobenius { weight } => (frobenius(block) - weight).max(0.0),
        RegularizerKind::MetricEnvelope { metric } => {
            let l = metric.size();
            pair_violation(block, DIM, metric).max(sum_violation(block, DIM, l)).max(0.0)
        }
        RegularizerKind::AnisoMetricL1 { metric } => {
            let l = metric.size();
            block
                .chunks_exact(l)
                .map(|row| pair_violation(row, 1, metric).max(sum_violation(row, 1, l)))
                .fold(0.0, f64::max)
        }
    }
}

/// Moves a nearly feasible block exactly into the dual set by re-centering
/// and radial shrinking.
pub(crate) fn restore_dual_block(kind: &RegularizerKind, block: &mut [f64]) {
    match kind {
        RegularizerKind::PottsFrobenius { .. } => {
            let mut none = Vec::new();
            project_dual_block(kind, block, &DlocConfig::default(), &mut none);
        }
        RegularizerKind::MetricEnvelope { metric } => make_feasible(block, DIM, metric),
        RegularizerKind::AnisoMetricL1 { metric } => {
            for row in block.chunks_exact_mut(metric.size()) {
                make_feasible(row, 1, metric);
            }
        }
    }
}
