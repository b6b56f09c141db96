//! Probabilistic multiclass rounding and Monte Carlo estimation of the
//! expected rounded energy.
//!
//! [`round_once`] repeatedly draws a label `i` and a threshold `α ∈ [0, 1)`
//! uniformly and assigns `i` to every still unassigned pixel with
//! `u_i(x) > α`, until no pixel is left. Each round assigns a pixel with
//! probability `1/l` and, given that, label `i` with probability `u_i(x)`,
//! so the marginal law of the output at `x` is `u(x)` and the expected data
//! energy equals the relaxed one.

use rand::Rng;
use rand_pcg::Pcg32;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{datacost, embed_integral, DataTerm, GridShape, IntegralField, SimplexField, DIM};
use crate::reduce::{pairwise_mean, pairwise_sum};
use crate::regularizer::{psi_unchecked, DlocConfig, RegularizerKind};

/// Seed and stream of a PCG32 generator (XSH-RR 64/32).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn generator(&self) -> Pcg32 {
        Pcg32::new(self.seed, self.stream)
    }

    /// Independent generator for Monte Carlo sample `k`.
    pub fn substream(&self, k: u64) -> RngSpec {
        RngSpec {
            seed: splitmix64(self.seed ^ splitmix64(k)),
            stream: splitmix64(self.stream.wrapping_add(k.wrapping_mul(0x9e37_79b9_7f4a_7c15))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Default round budget `⌈64 l ln(pixels + 2)⌉`.
pub fn default_k_max(shape: GridShape) -> usize {
    (64.0 * shape.labels() as f64 * ((shape.pixels() + 2) as f64).ln()).ceil() as usize
}

/// State history of one rounding run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingTrace {
    /// Drawn `(label, threshold)` pairs, zero-based labels.
    pub gamma: Vec<(u32, f64)>,
    /// Smallest threshold drawn per label (1 if never drawn).
    pub c_final: Vec<f64>,
    /// Unassigned pixel count after each round.
    pub unassigned_history: Vec<usize>,
    /// Number of rounds until every pixel was assigned.
    pub k_final: usize,
}

/// Rounding that ran out of rounds; carries the partial trace.
#[derive(Clone, Debug)]
pub struct RoundingFailure {
    pub trace: RoundingTrace,
    pub k_max: usize,
}

impl From<RoundingFailure> for Error {
    fn from(f: RoundingFailure) -> Self {
        Error::RoundingBudget {
            k_max: f.k_max,
            unassigned: f.trace.unassigned_history.last().copied().unwrap_or(0),
        }
    }
}

/// One run of probabilistic rounding.
pub fn round_once(
    u: &SimplexField,
    rng: &RngSpec,
    k_max: usize,
) -> std::result::Result<(IntegralField, RoundingTrace), RoundingFailure> {
    let shape = u.shape();
    let l = shape.labels();
    let mut gen = rng.generator();
    let mut labels = vec![0u32; shape.pixels()];
    let mut unassigned: Vec<usize> = (0..shape.pixels()).collect();
    let mut trace = RoundingTrace {
        gamma: Vec::new(),
        c_final: vec![1.0; l],
        unassigned_history: Vec::new(),
        k_final: 0,
    };
    let values = u.values();
    for k in 1..=k_max {
        let label = gen.gen_range(0..l as u32);
        let alpha: f64 = gen.gen();
        trace.gamma.push((label, alpha));
        let c = &mut trace.c_final[label as usize];
        *c = c.min(alpha);
        unassigned.retain(|&px| {
            if values[px * l + label as usize] > alpha {
                labels[px] = label;
                false
            } else {
                true
            }
        });
        trace.unassigned_history.push(unassigned.len());
        if unassigned.is_empty() {
            trace.k_final = k;
            return Ok((IntegralField::from_raw(shape, labels), trace));
        }
    }
    Err(RoundingFailure { trace, k_max })
}

/// Pixelwise argmax; ties go to the lowest label.
pub fn round_argmax(u: &SimplexField) -> IntegralField {
    let shape = u.shape();
    let labels = u
        .values()
        .chunks_exact(shape.labels())
        .map(|c| {
            let mut best = 0;
            for (i, &v) in c.iter().enumerate() {
                if v > c[best] {
                    best = i;
                }
            }
            best as u32
        })
        .collect();
    IntegralField::from_raw(shape, labels)
}

/// Two-class threshold: label 0 where `u₀ > α`, label 1 elsewhere.
pub fn threshold_two_class(u: &SimplexField, alpha: f64) -> Result<IntegralField> {
    let shape = u.shape();
    if shape.labels() != 2 {
        return Err(Error::NotTwoClass(shape.labels()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!("threshold must lie in (0, 1), got {alpha}")));
    }
    let labels = u.values().chunks_exact(2).map(|c| u32::from(c[0] <= alpha)).collect();
    Ok(IntegralField::from_raw(shape, labels))
}

/// Energy of integral labelings with a precomputed table of `Ψ` values.
///
/// An integral field's gradient at `x` depends only on the labels at `x`,
/// its right neighbor and the pixel below (the pixel itself at the far
/// edges), so `Ψ` is evaluated once per label triple. The evaluation
/// reproduces [`crate::solver::primal_energy`] on `embed_integral(ū)`
/// bit for bit.
#[derive(Clone, Debug)]
pub struct IntegralEnergy {
    shape: GridShape,
    table: Vec<f64>,
    /// Largest per-triple residual of the `Ψ` table.
    pub max_residual: f64,
    pub unconverged: usize,
}

impl IntegralEnergy {
    pub fn new(shape: GridShape, kind: &RegularizerKind, cfg: &DlocConfig) -> Result<Self> {
        kind.check_labels(shape.labels())?;
        let l = shape.labels();
        let inv_h = 1.0 / shape.spacing();
        let values: Vec<_> = (0..l * l * l)
            .into_par_iter()
            .map(|t| {
                let (here, right, below) = (t / (l * l), (t / l) % l, t % l);
                let mut z = vec![0.0; DIM * l];
                if right != here {
                    z[right] = (1.0 - 0.0) * inv_h;
                    z[here] = (0.0 - 1.0) * inv_h;
                }
                if below != here {
                    z[l + below] = (1.0 - 0.0) * inv_h;
                    z[l + here] = (0.0 - 1.0) * inv_h;
                }
                psi_unchecked(kind, &z, cfg)
            })
            .collect();
        Ok(Self {
            shape,
            table: values.iter().map(|p| p.value).collect(),
            max_residual: values.iter().map(|p| p.residual).fold(0.0, f64::max),
            unconverged: values.iter().filter(|p| !p.converged).count(),
        })
    }

    /// `(data, reg)` energies of `labels`.
    pub fn energy(&self, labels: &IntegralField, s: &DataTerm) -> Result<(f64, f64)> {
        if labels.shape() != self.shape || s.shape() != self.shape {
            return Err(Error::ShapeMismatch("integral energy".into()));
        }
        let data = datacost(&embed_integral(labels), s)?;
        let (w, ht, l) = (self.shape.width(), self.shape.height(), self.shape.labels());
        let lab = labels.labels();
        let terms: Vec<f64> = (0..self.shape.pixels())
            .map(|px| {
                let (x, y) = self.shape.coords(px);
                let here = lab[px] as usize;
                let right = if x + 1 < w { lab[px + 1] as usize } else { here };
                let below = if y + 1 < ht { lab[px + w] as usize } else { here };
                self.table[(here * l + right) * l + below]
            })
            .collect();
        Ok((data, pairwise_sum(&terms) * self.shape.cell_area()))
    }
}

/// Monte Carlo summary of `f(ū)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingStats {
    /// Completed samples.
    pub n_samples: usize,
    /// Samples that hit the round budget (excluded from the statistics).
    pub n_failed: usize,
    pub mean_f: f64,
    pub std_f: f64,
    pub ci95_halfwidth: f64,
    pub mean_data: f64,
    pub std_data: f64,
    pub mean_reg: f64,
    pub mean_k_final: f64,
    pub min_f: f64,
    pub max_f: f64,
    /// Empirical label frequencies per pixel (pixel-major, label-fastest).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginals: Option<Vec<f64>>,
}

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub n_samples: usize,
    /// Round budget per sample; `None` selects [`default_k_max`].
    pub k_max: Option<usize>,
    /// Collect per-pixel label frequencies.
    pub marginals: bool,
    pub dloc: DlocConfig,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self { n_samples: 1000, k_max: None, marginals: false, dloc: DlocConfig::default() }
    }
}

struct Sample {
    data: f64,
    reg: f64,
    k_final: usize,
    labels: IntegralField,
}

/// Estimates `E f(ū)` from independent rounding runs.
///
/// Sample `k` uses `rng.substream(k)`; results are reduced in sample order,
/// so the statistics do not depend on the worker count.
pub fn estimate_expectation(
    u: &SimplexField,
    s: &DataTerm,
    kind: &RegularizerKind,
    rng: &RngSpec,
    cfg: &EstimateConfig,
) -> Result<RoundingStats> {
    if cfg.n_samples < 2 {
        return Err(Error::Config(format!("need at least 2 samples, got {}", cfg.n_samples)));
    }
    if u.shape() != s.shape() {
        return Err(Error::ShapeMismatch("relaxed field and data term differ".into()));
    }
    let shape = u.shape();
    let energy = IntegralEnergy::new(shape, kind, &cfg.dloc)?;
    let k_max = cfg.k_max.unwrap_or_else(|| default_k_max(shape));

    let results: Vec<Option<Sample>> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|k| {
            let (labels, trace) = round_once(u, &rng.substream(k), k_max).ok()?;
            let (data, reg) = energy.energy(&labels, s).expect("shapes checked");
            Some(Sample { data, reg, k_final: trace.k_final, labels })
        })
        .collect();

    let samples: Vec<&Sample> = results.iter().flatten().collect();
    let n_failed = cfg.n_samples - samples.len();
    if n_failed * 100 > cfg.n_samples {
        return Err(Error::TooManyRoundingFailures { failed: n_failed, total: cfg.n_samples });
    }
    if samples.len() < 2 {
        return Err(Error::TooManyRoundingFailures { failed: n_failed, total: cfg.n_samples });
    }

    let f: Vec<f64> = samples.iter().map(|x| x.data + x.reg).collect();
    let data: Vec<f64> = samples.iter().map(|x| x.data).collect();
    let reg: Vec<f64> = samples.iter().map(|x| x.reg).collect();
    let k: Vec<f64> = samples.iter().map(|x| x.k_final as f64).collect();
    let n = samples.len() as f64;
    let std_f = sample_std(&f);

    let marginals = cfg.marginals.then(|| {
        let l = shape.labels();
        let mut counts = vec![0.0; shape.vector_len()];
        for x in &samples {
            for (px, &i) in x.labels.labels().iter().enumerate() {
                counts[px * l + i as usize] += 1.0;
            }
        }
        counts.iter().map(|c| c / n).collect()
    });

    Ok(RoundingStats {
        n_samples: samples.len(),
        n_failed,
        mean_f: pairwise_mean(&f),
        std_f,
        ci95_halfwidth: Z95 * std_f / n.sqrt(),
        mean_data: pairwise_mean(&data),
        std_data: sample_std(&data),
        mean_reg: pairwise_mean(&reg),
        mean_k_final: pairwise_mean(&k),
        min_f: f.iter().copied().fold(f64::INFINITY, f64::min),
        max_f: f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        marginals,
    })
}

fn sample_std(values: &[f64]) -> f64 {
    let mean = pairwise_mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (pairwise_sum(&sq) / (values.len() - 1) as f64).sqrt()
}

/// Lower bound on the probability that every per-label minimum threshold
/// is below `1/l` after `k` rounds (a sufficient condition for termination):
///
/// ```text
///   Σ_{m=0}^{l} C(l, m) (−1)^m (1 − m/l²)^k
/// ```
///
/// clamped to `[0, 1]`.
pub fn termination_bound(labels: usize, k: usize) -> f64 {
    let l = labels as f64;
    let mut binom = 1.0;
    let mut total = 0.0;
    for m in 0..=labels {
        if m > 0 {
            binom = binom * (labels - m + 1) as f64 / m as f64;
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * binom * (1.0 - m as f64 / (l * l)).powi(k as i32);
    }
    total.clamp(0.0, 1.0)
}
