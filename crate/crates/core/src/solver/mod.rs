//! First-order primal-dual solver for the relaxed labeling problem.
//!
//! The iteration works on the saddle-point form
//!
//! ```text
//!   min_{u ∈ C} max_{p ∈ D^Ω}  <u, s> + <∇u, p>
//! ```
//!
//! where `∇` is the `1/h`-scaled forward difference and `D` the dual set of
//! the regularizer (a Frobenius ball for Potts, `D_loc` for the metric
//! variants). Reported energies carry the cell area `h²`:
//!
//! ```text
//!   f(u)   = h² Σ_x <u(x), s(x)> + h² Σ_x Ψ(∇u(x))
//!   f_D(p) = h² Σ_x min_i ( s_i(x) − (div p)_i(x) )
//! ```
//!
//! and `f_D(p) ≤ f(u)` for every feasible pair since `div = −∇ᵀ`.

mod ops;

pub use ops::{divergence, gradient};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{datacost, DataTerm, DualField, GridShape, MatrixField, SimplexField};
use crate::reduce::pairwise_sum;
use crate::regularizer::{
    dual_block_violation, project_dual_block, restore_dual_block, total_reg_energy, DlocConfig,
    RegularizerKind,
};
use crate::simplex::project_simplex_in_place;

/// Floor of the denominator in the relative gap.
pub const REL_GAP_FLOOR: f64 = 1e-12;

/// Squared operator norm bound of the scaled 2-D forward difference.
pub fn gradient_norm_sq(shape: GridShape) -> f64 {
    let h = shape.spacing();
    8.0 / (h * h)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Primal step; `None` selects `1/L`.
    pub tau: Option<f64>,
    /// Dual step; `None` selects `1/L`.
    pub sigma: Option<f64>,
    pub theta: f64,
    pub max_iters: usize,
    pub gap_tol: f64,
    pub check_every: usize,
    pub dloc: DlocConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau: None,
            sigma: None,
            theta: 1.0,
            max_iters: 20_000,
            gap_tol: 1e-3,
            check_every: 50,
            dloc: DlocConfig::default(),
        }
    }
}

impl SolverConfig {
    /// Resolves and checks the step sizes for `shape` (`τσL² ≤ 1`).
    pub fn steps(&self, shape: GridShape) -> Result<(f64, f64)> {
        let lsq = gradient_norm_sq(shape);
        let default = 1.0 / lsq.sqrt();
        let tau = self.tau.unwrap_or(default);
        let sigma = self.sigma.unwrap_or(default);
        if !(tau > 0.0 && sigma > 0.0 && tau.is_finite() && sigma.is_finite()) {
            return Err(Error::Config(format!("steps must be positive, got τ={tau} σ={sigma}")));
        }
        if tau * sigma * lsq > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "τσL² = {} exceeds 1 (τ={tau}, σ={sigma}, L²={lsq})",
                tau * sigma * lsq
            )));
        }
        Ok((tau, sigma))
    }

    pub fn validate(&self, shape: GridShape) -> Result<()> {
        self.steps(shape)?;
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Config(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        if self.max_iters == 0 || self.check_every == 0 {
            return Err(Error::Config("max_iters and check_every must be >= 1".into()));
        }
        if !(self.gap_tol.is_finite() && self.gap_tol >= 0.0) {
            return Err(Error::Config(format!("gap_tol must be >= 0, got {}", self.gap_tol)));
        }
        self.dloc.validate()
    }
}

/// Primal and dual energies of an iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub primal: f64,
    pub data_part: f64,
    pub reg_part: f64,
    pub dual: f64,
    pub gap: f64,
    pub rel_gap: f64,
    /// Upper bound on how far `reg_part` may sit below the exact value.
    pub reg_residual: f64,
    /// Pixels whose `Ψ` evaluation hit an iteration budget.
    pub unconverged_pixels: usize,
}

/// Primal part of an [`EnergyReport`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrimalEnergy {
    pub primal: f64,
    pub data_part: f64,
    pub reg_part: f64,
    pub reg_residual: f64,
    pub unconverged_pixels: usize,
}

/// `f(u)` split into its data and regularizer parts.
pub fn primal_energy(
    u: &SimplexField,
    s: &DataTerm,
    kind: &RegularizerKind,
    cfg: &DlocConfig,
) -> Result<PrimalEnergy> {
    let data_part = datacost(u, s)?;
    let reg = total_reg_energy(kind, &gradient(u), cfg)?;
    Ok(PrimalEnergy {
        primal: data_part + reg.value,
        data_part,
        reg_part: reg.value,
        reg_residual: reg.residual,
        unconverged_pixels: reg.unconverged,
    })
}

/// Dual objective `f_D(p) = h² Σ_x min_i (s_i(x) − (div p)_i(x))`.
///
/// `p` must be feasible for the regularizer for this to bound `f` from below.
pub fn dual_energy(p: &DualField, s: &DataTerm) -> Result<f64> {
    if p.shape() != s.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", p.shape(), s.shape())));
    }
    let shape = s.shape();
    let l = shape.labels();
    let div = divergence(p);
    let terms: Vec<f64> = s
        .costs()
        .chunks_exact(l)
        .zip(div.chunks_exact(l))
        .map(|(c, d)| c.iter().zip(d).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(pairwise_sum(&terms) * shape.cell_area())
}

/// Largest dual constraint violation over all pixels.
pub fn dual_violation(p: &DualField, kind: &RegularizerKind) -> f64 {
    p.values()
        .chunks_exact(p.block_len())
        .map(|b| dual_block_violation(kind, b))
        .fold(0.0, f64::max)
}

/// Checks `p` against the dual set of `kind` and snaps it exactly inside.
///
/// Fails with the maximum violation when it exceeds `tol`.
pub fn restore_dual(p: &mut DualField, kind: &RegularizerKind, tol: f64) -> Result<f64> {
    kind.check_labels(p.shape().labels())?;
    let violation = dual_violation(p, kind);
    if violation > tol {
        return Err(Error::Infeasible(format!(
            "dual violates its constraints by {violation:e} (tolerance {tol:e})"
        )));
    }
    let n = p.block_len();
    for block in p.values_mut().chunks_exact_mut(n) {
        restore_dual_block(kind, block);
    }
    Ok(violation)
}

/// Iterate of the primal-dual method.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub u: SimplexField,
    pub u_prev: SimplexField,
    pub p: DualField,
    pub iter: usize,
}

impl SolverState {
    /// Uniform `u`, zero `p`.
    pub fn new(shape: GridShape) -> Self {
        Self::warm(SimplexField::uniform(shape), MatrixField::zeros(shape))
    }

    pub fn warm(u: SimplexField, p: DualField) -> Self {
        Self { u_prev: u.clone(), u, p, iter: 0 }
    }
}

/// Per-step bookkeeping.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepStatus {
    /// Pixels whose dual projection did not reach its tolerance.
    pub dual_unconverged: usize,
}

/// One primal-dual iteration:
///
/// ```text
///   ū ← u + θ (u − u_prev)
///   p ← P_D(p + σ ∇ū)
///   u ← P_Δ(u − τ (s − div p))
/// ```
pub fn pd_step(
    state: &mut SolverState,
    s: &DataTerm,
    kind: &RegularizerKind,
    cfg: &SolverConfig,
) -> Result<StepStatus> {
    let shape = state.u.shape();
    if s.shape() != shape || state.p.shape() != shape {
        return Err(Error::ShapeMismatch("solver state and data term differ".into()));
    }
    kind.check_labels(shape.labels())?;
    let (tau, sigma) = cfg.steps(shape)?;
    Ok(step_unchecked(state, s, kind, cfg, tau, sigma))
}

fn step_unchecked(
    state: &mut SolverState,
    s: &DataTerm,
    kind: &RegularizerKind,
    cfg: &SolverConfig,
    tau: f64,
    sigma: f64,
) -> StepStatus {
    let shape = state.u.shape();
    let l = shape.labels();
    let theta = cfg.theta;

    let extrapolated: Vec<f64> = state
        .u
        .values()
        .iter()
        .zip(state.u_prev.values())
        .map(|(u, up)| u + theta * (u - up))
        .collect();
    let grad = ops::gradient_values(shape, &extrapolated);

    let n = state.p.block_len();
    let dual_unconverged = state
        .p
        .values_mut()
        .par_chunks_mut(n)
        .zip(grad.par_chunks(n))
        .map_init(Vec::new, |scratch, (block, g)| {
            for (pv, gv) in block.iter_mut().zip(g) {
                *pv += sigma * gv;
            }
            project_dual_block(kind, block, &cfg.dloc, scratch)
        })
        .filter(|ok| !ok)
        .count();

    let div = ops::divergence_values(shape, state.p.values());
    std::mem::swap(&mut state.u_prev, &mut state.u);
    let prev = state.u_prev.values();
    let costs = s.costs();
    let next = state.u.values_mut();
    next.par_chunks_mut(l).enumerate().for_each(|(px, out)| {
        let r = px * l..(px + 1) * l;
        for (((o, &u), &c), &d) in out.iter_mut().zip(&prev[r.clone()]).zip(&costs[r.clone()]).zip(&div[r])
        {
            *o = u - tau * (c - d);
        }
        project_simplex_in_place(out);
    });
    state.iter += 1;
    StepStatus { dual_unconverged }
}

/// Energies of a primal-dual pair.
pub fn evaluate(
    u: &SimplexField,
    p: &DualField,
    s: &DataTerm,
    kind: &RegularizerKind,
    cfg: &DlocConfig,
) -> Result<EnergyReport> {
    let primal = primal_energy(u, s, kind, cfg)?;
    let dual = dual_energy(p, s)?;
    let gap = primal.primal - dual;
    Ok(EnergyReport {
        primal: primal.primal,
        data_part: primal.data_part,
        reg_part: primal.reg_part,
        dual,
        gap,
        rel_gap: gap / dual.abs().max(REL_GAP_FLOOR),
        reg_residual: primal.reg_residual,
        unconverged_pixels: primal.unconverged_pixels,
    })
}

/// One row of the iteration log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub iter: usize,
    pub primal: f64,
    pub dual: f64,
    pub rel_gap: f64,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    /// Best-gap primal iterate.
    pub u: SimplexField,
    /// Dual iterate paired with `u`.
    pub p: DualField,
    pub report: EnergyReport,
    pub log: Vec<LogRow>,
    /// Whether `rel_gap ≤ gap_tol` was reached.
    pub converged: bool,
    pub iterations: usize,
    /// Total count of dual projections that hit their sweep budget.
    pub dual_unconverged: usize,
}

/// Runs [`pd_step`] until the relative gap reaches `cfg.gap_tol` or the
/// iteration budget is spent, checking energies every `cfg.check_every`
/// iterations. Returns the checkpoint with the smallest relative gap.
pub fn solve(
    s: &DataTerm,
    kind: &RegularizerKind,
    cfg: &SolverConfig,
    initial: Option<SimplexField>,
) -> Result<SolveOutcome> {
    let shape = s.shape();
    cfg.validate(shape)?;
    kind.check_labels(shape.labels())?;
    let (tau, sigma) = cfg.steps(shape)?;

    let mut state = match initial {
        Some(u) if u.shape() != shape => {
            return Err(Error::ShapeMismatch("initial field does not match data term".into()))
        }
        Some(u) => SolverState::warm(u, MatrixField::zeros(shape)),
        None => SolverState::new(shape),
    };

    let mut log = Vec::new();
    let mut best: Option<(EnergyReport, SimplexField, DualField)> = None;
    let mut dual_unconverged = 0;
    let mut converged = false;
    while state.iter < cfg.max_iters {
        dual_unconverged += step_unchecked(&mut state, s, kind, cfg, tau, sigma).dual_unconverged;
        if state.iter % cfg.check_every != 0 && state.iter != cfg.max_iters {
            continue;
        }
        let report = evaluate(&state.u, &state.p, s, kind, &cfg.dloc)?;
        log.push(LogRow {
            iter: state.iter,
            primal: report.primal,
            dual: report.dual,
            rel_gap: report.rel_gap,
        });
        if best.as_ref().is_none_or(|(b, _, _)| report.rel_gap < b.rel_gap) {
            best = Some((report, state.u.clone(), state.p.clone()));
        }
        if report.rel_gap <= cfg.gap_tol {
            converged = true;
            break;
        }
    }
    let (report, u, p) = best.expect("max_iters >= 1 guarantees a checkpoint");
    Ok(SolveOutcome {
        u,
        p,
        report,
        log,
        converged,
        iterations: state.iter,
        dual_unconverged,
    })
}
