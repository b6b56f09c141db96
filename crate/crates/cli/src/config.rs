//! JSON run configuration shared by all subcommands.

use std::path::PathBuf;

use mcrelax::{Metric, RegularizerKind, SolverConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegularizerSpec {
    PottsFrobenius {
        #[serde(default = "default_potts_weight")]
        weight: f64,
    },
    MetricEnvelope {
        metric: Vec<Vec<f64>>,
    },
    AnisoMetricL1 {
        metric: Vec<Vec<f64>>,
    },
}

fn default_potts_weight() -> f64 {
    std::f64::consts::FRAC_1_SQRT_2
}

impl Default for RegularizerSpec {
    fn default() -> Self {
        Self::PottsFrobenius { weight: default_potts_weight() }
    }
}

impl RegularizerSpec {
    pub fn build(&self) -> mcrelax::Result<RegularizerKind> {
        match self {
            Self::PottsFrobenius { weight } => RegularizerKind::potts_weighted(*weight),
            Self::MetricEnvelope { metric } => {
                Ok(RegularizerKind::MetricEnvelope { metric: Metric::from_rows(metric)? })
            }
            Self::AnisoMetricL1 { metric } => {
                Ok(RegularizerKind::AnisoMetricL1 { metric: Metric::from_rows(metric)? })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoundingConfig {
    pub seed: u64,
    pub stream: u64,
    pub n_samples: usize,
    /// Round budget per run; `None` uses `⌈64 l ln(pixels + 2)⌉`.
    pub k_max: Option<usize>,
}

impl Default for RoundingConfig {
    fn default() -> Self {
        Self { seed: 0, stream: 0, n_samples: 1000, k_max: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    /// Constant added to every cost before rounding and certifying. The
    /// certificate records it; its bounds then refer to the shifted problem.
    pub data_offset: f64,
    /// Largest dual constraint violation repaired on load.
    pub dual_tol: f64,
    /// Quadrature node counts for `coarea`.
    pub n_alpha: Vec<usize>,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self { data_offset: 0.0, dual_tol: 1e-6, n_alpha: vec![10, 100, 1000] }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub problem: Option<PathBuf>,
    pub solution: Option<PathBuf>,
    pub dual: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub pgm: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub regularizer: RegularizerSpec,
    pub solver: SolverConfig,
    pub rounding: RoundingConfig,
    pub certify: CertifyConfig,
    pub io: IoConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| format!("config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that do not depend on the problem size.
    pub fn validate(&self) -> Result<(), String> {
        self.regularizer.build().map_err(|e| format!("config.regularizer: {e}"))?;
        if self.rounding.n_samples == 0 {
            return Err("config.rounding.n_samples must be >= 1".into());
        }
        if self.rounding.k_max == Some(0) {
            return Err("config.rounding.k_max must be >= 1".into());
        }
        let c = &self.certify;
        if !(c.data_offset.is_finite() && c.data_offset >= 0.0) {
            return Err(format!("config.certify.data_offset must be finite and >= 0, got {}", c.data_offset));
        }
        if !(c.dual_tol.is_finite() && c.dual_tol >= 0.0) {
            return Err(format!("config.certify.dual_tol must be finite and >= 0, got {}", c.dual_tol));
        }
        if c.n_alpha.contains(&0) {
            return Err("config.certify.n_alpha entries must be >= 1".into());
        }
        self.solver.dloc.validate().map_err(|e| format!("config.solver.dloc: {e}"))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form with the `io` section cleared, so
    /// the hash identifies the computation and not where files live.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.io = IoConfig::default();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.regularizer.build().unwrap(), RegularizerKind::potts());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"solvr": {}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"solver": {"iters": 3}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"rounding": {"seed": 1, "x": 0}}"#).is_err());
        assert!(RunConfig::from_json(
            r#"{"regularizer": {"variant": "potts_frobenius", "weight": 1, "metric": []}}"#
        )
        .is_err());
        assert!(RunConfig::from_json(r#"{"regularizer": {"variant": "tv"}}"#).is_err());
    }

    #[test]
    fn metric_is_validated() {
        let ok = r#"{"regularizer": {"variant": "metric_envelope", "metric": [[0, 1], [1, 0]]}}"#;
        assert!(RunConfig::from_json(ok).is_ok());
        let bad = r#"{"regularizer": {"variant": "aniso_metric_l1", "metric": [[0, 1], [2, 0]]}}"#;
        assert!(RunConfig::from_json(bad).unwrap_err().contains("regularizer"));
        let tri = r#"{"regularizer": {"variant": "metric_envelope",
                      "metric": [[0, 1, 5], [1, 0, 1], [5, 1, 0]]}}"#;
        assert!(RunConfig::from_json(tri).is_err());
    }

    #[test]
    fn digest_ignores_paths() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.io.out = Some("elsewhere.json".into());
        assert_eq!(a.digest(), b.digest());
        b.rounding.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }
}
