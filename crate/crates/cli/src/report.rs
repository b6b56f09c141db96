//! JSON report written by every pipeline subcommand.

use mcrelax::certify::{Certificate, CoareaReport};
use mcrelax::rounding::RoundingStats;
use mcrelax::solver::LogRow;
use mcrelax::{EnergyReport, GridShape};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RegularizerSpec;

/// JSON Schema (draft 7) every report validates against.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

/// Relative tolerance of [`Report::check_consistency`].
pub const CONSISTENCY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemInfo {
    pub width: usize,
    pub height: usize,
    pub labels: usize,
}

impl From<GridShape> for ProblemInfo {
    fn from(s: GridShape) -> Self {
        Self { width: s.width(), height: s.height(), labels: s.labels() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub converged: bool,
    pub iterations: usize,
    pub dual_unconverged: usize,
    pub tau: f64,
    pub sigma: f64,
}

/// The labeling written to disk: Monte Carlo sample 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub k_final: usize,
    pub f: f64,
    pub data: f64,
    pub reg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingReport {
    pub seed: u64,
    pub stream: u64,
    pub k_max: usize,
    pub sample: SampleReport,
    /// Absent when fewer than two samples were requested.
    pub stats: Option<RoundingStats>,
}

/// Direct comparison against the enumerated integral optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveReport {
    pub f_star: f64,
    /// `f_D(p) ≤ f*`: the relaxed optimum lies below the integral one.
    pub dual_below_optimum: bool,
    /// Every rounded sample costs at least `f*`.
    pub samples_above_optimum: bool,
    /// `mean_f − ci95 ≤ factor · f*`.
    pub mean_within_factor: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub config_sha256: String,
    pub inputs: Vec<InputDigest>,
    /// Seconds since the Unix epoch; not part of [`Report::digest`].
    pub timestamp: u64,
}

impl Provenance {
    pub fn new(config_sha256: String, inputs: Vec<InputDigest>) -> Self {
        Self {
            tool: "mcrelax".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            core_version: mcrelax::VERSION.into(),
            config_sha256,
            inputs,
            timestamp: now(),
        }
    }
}

/// Wall clock time, overridable through `SOURCE_DATE_EPOCH`.
fn now() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return t;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub problem: ProblemInfo,
    pub regularizer: RegularizerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energies: Option<EnergyReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub log: Vec<LogRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounding: Option<RoundingReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exhaustive: Option<ExhaustiveReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coarea: Vec<CoareaReport>,
    pub provenance: Provenance,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONSISTENCY_TOL * a.abs().max(b.abs()).max(1e-300)
}

impl Report {
    pub fn new(command: &str, shape: GridShape, regularizer: RegularizerSpec, provenance: Provenance) -> Self {
        Self {
            command: command.into(),
            problem: shape.into(),
            regularizer,
            energies: None,
            solver: None,
            log: Vec::new(),
            rounding: None,
            certificate: None,
            exhaustive: None,
            coarea: Vec::new(),
            provenance,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// SHA-256 of the JSON form with the timestamp zeroed.
    pub fn digest(&self) -> String {
        let mut r = self.clone();
        r.provenance.timestamp = 0;
        sha256_hex(r.to_json().as_bytes())
    }

    /// Checks that totals equal the sum of their parts.
    pub fn check_consistency(&self) -> Result<(), String> {
        if let Some(e) = &self.energies {
            if !close(e.primal, e.data_part + e.reg_part) {
                return Err(format!("primal {} != data {} + reg {}", e.primal, e.data_part, e.reg_part));
            }
            if !close(e.gap, e.primal - e.dual) {
                return Err(format!("gap {} != primal {} - dual {}", e.gap, e.primal, e.dual));
            }
        }
        if let Some(r) = &self.rounding {
            if !close(r.sample.f, r.sample.data + r.sample.reg) {
                return Err(format!("sample f {} != data + reg", r.sample.f));
            }
            if let Some(s) = &r.stats {
                if !close(s.mean_f, s.mean_data + s.mean_reg) {
                    return Err(format!("mean_f {} != mean_data + mean_reg", s.mean_f));
                }
            }
        }
        Ok(())
    }
}
