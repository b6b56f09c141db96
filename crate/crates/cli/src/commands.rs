//! Subcommand implementations. Each reads its inputs from disk, writes its
//! outputs, and returns the report it wrote.

use std::path::Path;

use mcrelax::certify::{
    a_posteriori_eps, check_bound, coarea_check_two_class, exhaustive_minimum,
};
use mcrelax::rounding::{default_k_max, estimate_expectation, round_once, EstimateConfig, IntegralEnergy};
use mcrelax::solver::{dual_energy, evaluate, restore_dual, solve};
use mcrelax::{DataTerm, DualField, MatrixField, RegularizerKind, RngSpec, SimplexField};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::formats::{self, FormatError};
use crate::phantom::{synth, Phantom, SynthParams};
use crate::report::{
    sha256_hex, ExhaustiveReport, InputDigest, Provenance, Report, RoundingReport, SampleReport,
    SolverSummary,
};

/// Largest instance `certify` checks against exhaustive enumeration.
pub const EXHAUSTIVE_MAX_PIXELS: usize = 9;
pub const EXHAUSTIVE_MAX_LABELS: usize = 3;

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.into(), source })
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.into(), source })
}

fn decode<T>(path: &Path, r: Result<T, FormatError>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Format { path: path.into(), source })
}

/// A decoded input file with the digest of its bytes.
struct Loaded<T> {
    value: T,
    digest: InputDigest,
}

fn load<T>(
    role: &str,
    path: &Path,
    parse: impl FnOnce(&[u8]) -> Result<T, FormatError>,
) -> Result<Loaded<T>, CliError> {
    let bytes = read_bytes(path)?;
    let value = decode(path, parse(&bytes))?;
    Ok(Loaded { value, digest: InputDigest { role: role.into(), sha256: sha256_hex(&bytes) } })
}

fn shapes_match(s: &DataTerm, u: &SimplexField) -> Result<(), CliError> {
    if s.shape() != u.shape() {
        return Err(CliError::Validation(format!(
            "problem is {:?} but solution is {:?}",
            s.shape(),
            u.shape()
        )));
    }
    Ok(())
}

fn finish(report: Report, out: Option<&Path>) -> Result<Report, CliError> {
    report.check_consistency().map_err(|e| CliError::Validation(format!("inconsistent report: {e}")))?;
    if let Some(path) = out {
        write_bytes(path, report.to_json().as_bytes())?;
    }
    Ok(report)
}

/// Shared setup: regularizer, problem and optional data offset.
struct Setup {
    kind: RegularizerKind,
    problem: Loaded<DataTerm>,
}

fn setup(cfg: &RunConfig, problem: &Path) -> Result<Setup, CliError> {
    cfg.validate().map_err(CliError::Validation)?;
    let kind = cfg.regularizer.build()?;
    let problem = load("problem", problem, formats::decode_problem)?;
    kind.check_labels(problem.value.shape().labels())?;
    Ok(Setup { kind, problem })
}

/// Data term the certificate refers to: the problem plus the configured offset.
fn certified_data(cfg: &RunConfig, s: &DataTerm) -> Result<DataTerm, CliError> {
    if cfg.certify.data_offset == 0.0 {
        Ok(s.clone())
    } else {
        Ok(s.shifted(cfg.certify.data_offset)?)
    }
}

pub fn cmd_synth(phantom: Phantom, params: &SynthParams, out: &Path) -> Result<DataTerm, CliError> {
    let s = synth(phantom, params)?;
    write_bytes(out, &formats::encode_problem(&s))?;
    Ok(s)
}

/// Solves the relaxation, writes the solution (and dual, if asked), and
/// fails with a budget error after writing everything if the gap tolerance
/// was not reached.
pub fn cmd_solve(
    cfg: &RunConfig,
    problem: &Path,
    solution: &Path,
    dual: Option<&Path>,
    out: Option<&Path>,
) -> Result<Report, CliError> {
    let Setup { kind, problem } = setup(cfg, problem)?;
    let s = &problem.value;
    let (tau, sigma) = cfg.solver.steps(s.shape())?;
    let outcome = solve(s, &kind, &cfg.solver, None)?;
    write_bytes(solution, &formats::encode_solution(&outcome.u))?;
    if let Some(path) = dual {
        write_bytes(path, &formats::encode_dual(&outcome.p))?;
    }
    let mut report = Report::new(
        "solve",
        s.shape(),
        cfg.regularizer.clone(),
        Provenance::new(cfg.digest(), vec![problem.digest]),
    );
    report.energies = Some(outcome.report);
    report.solver = Some(SolverSummary {
        converged: outcome.converged,
        iterations: outcome.iterations,
        dual_unconverged: outcome.dual_unconverged,
        tau,
        sigma,
    });
    report.log = outcome.log;
    let report = finish(report, out)?;
    if !outcome.converged {
        return Err(CliError::Budget(format!(
            "solver stopped after {} iterations at relative gap {:e} (tolerance {:e})",
            outcome.iterations, outcome.report.rel_gap, cfg.solver.gap_tol
        )));
    }
    Ok(report)
}

fn rounding_section(
    cfg: &RunConfig,
    u: &SimplexField,
    s: &DataTerm,
    kind: &RegularizerKind,
) -> Result<(RoundingReport, mcrelax::IntegralField), CliError> {
    let r = &cfg.rounding;
    let rng = RngSpec::new(r.seed, r.stream);
    let k_max = r.k_max.unwrap_or_else(|| default_k_max(u.shape()));
    let (labels, trace) = round_once(u, &rng.substream(0), k_max).map_err(mcrelax::Error::from)?;
    let table = IntegralEnergy::new(u.shape(), kind, &cfg.solver.dloc)?;
    let (data, reg) = table.energy(&labels, s)?;
    let stats = if r.n_samples >= 2 {
        let est = EstimateConfig { n_samples: r.n_samples, k_max: Some(k_max), marginals: false, dloc: cfg.solver.dloc };
        Some(estimate_expectation(u, s, kind, &rng, &est)?)
    } else {
        None
    };
    let section = RoundingReport {
        seed: r.seed,
        stream: r.stream,
        k_max,
        sample: SampleReport { k_final: trace.k_final, f: data + reg, data, reg },
        stats,
    };
    Ok((section, labels))
}

/// Rounds a relaxed solution: writes sample 0 as a PGM label map and
/// reports Monte Carlo statistics over `n_samples` runs.
pub fn cmd_round(
    cfg: &RunConfig,
    problem: &Path,
    solution: &Path,
    pgm: Option<&Path>,
    out: Option<&Path>,
) -> Result<Report, CliError> {
    let Setup { kind, problem } = setup(cfg, problem)?;
    let u = load("solution", solution, formats::decode_solution)?;
    shapes_match(&problem.value, &u.value)?;
    let s = certified_data(cfg, &problem.value)?;
    let (section, labels) = rounding_section(cfg, &u.value, &s, &kind)?;
    if let Some(path) = pgm {
        write_bytes(path, &formats::encode_pgm(&labels))?;
    }
    let mut report = Report::new(
        "round",
        s.shape(),
        cfg.regularizer.clone(),
        Provenance::new(cfg.digest(), vec![problem.digest, u.digest]),
    );
    report.rounding = Some(section);
    finish(report, out)
}

/// Builds the full certificate for a relaxed solution and, optionally, a
/// dual field from `solve --dual`.
pub fn cmd_certify(
    cfg: &RunConfig,
    problem: &Path,
    solution: &Path,
    dual: Option<&Path>,
    out: Option<&Path>,
) -> Result<Report, CliError> {
    let Setup { kind, problem } = setup(cfg, problem)?;
    let u = load("solution", solution, formats::decode_solution)?;
    shapes_match(&problem.value, &u.value)?;
    if cfg.rounding.n_samples < 2 {
        return Err(CliError::Validation("certify needs rounding.n_samples >= 2".into()));
    }
    let s = certified_data(cfg, &problem.value)?;
    let shape = s.shape();
    let mut inputs = vec![problem.digest, u.digest];

    let p: DualField = match dual {
        Some(path) => {
            let mut p = load("dual", path, formats::decode_dual)?;
            if p.value.shape() != shape {
                return Err(CliError::Validation(format!(
                    "dual is {:?} but problem is {shape:?}",
                    p.value.shape()
                )));
            }
            restore_dual(&mut p.value, &kind, cfg.certify.dual_tol)?;
            inputs.push(p.digest);
            p.value
        }
        // Zero is always dual feasible; its value is the data-only bound.
        None => MatrixField::zeros(shape),
    };
    let energies = evaluate(&u.value, &p, &s, &kind, &cfg.solver.dloc)?;
    let (section, _) = rounding_section(cfg, &u.value, &s, &kind)?;
    let stats = section.stats.clone().expect("n_samples >= 2");

    let mut cert = check_bound(&u.value, &s, &kind, &stats, &cfg.solver.dloc)?;
    cert.data_offset = cfg.certify.data_offset;
    if dual.is_some() {
        // ε′ certifies the labeling `round` writes for the same seed.
        let f_dual = dual_energy(&p, &s)?;
        let f_sample = section.sample.f;
        cert = match a_posteriori_eps(f_sample, f_dual) {
            Ok(_) => cert.with_dual(f_sample, f_dual)?,
            Err(_) => mcrelax::certify::Certificate { f_dual: Some(f_dual), ..cert },
        };
    }

    let exhaustive = if shape.pixels() <= EXHAUSTIVE_MAX_PIXELS && shape.labels() <= EXHAUSTIVE_MAX_LABELS {
        let (_, f_star) = exhaustive_minimum(&s, &kind, &cfg.solver.dloc)?;
        Some(ExhaustiveReport {
            f_star,
            dual_below_optimum: energies.dual <= f_star + 1e-9 * f_star.abs().max(1.0),
            samples_above_optimum: stats.min_f >= f_star - 1e-12 * f_star.abs().max(1.0),
            mean_within_factor: stats.mean_f - stats.ci95_halfwidth <= cert.a_priori_factor * f_star,
        })
    } else {
        None
    };

    let mut report =
        Report::new("certify", shape, cfg.regularizer.clone(), Provenance::new(cfg.digest(), inputs));
    report.energies = Some(energies);
    report.rounding = Some(section);
    report.certificate = Some(cert);
    report.exhaustive = exhaustive;
    finish(report, out)
}

/// Tabulates the coarea deviation of a two-class solution for each
/// configured quadrature node count.
pub fn cmd_coarea(
    cfg: &RunConfig,
    problem: &Path,
    solution: &Path,
    out: Option<&Path>,
) -> Result<Report, CliError> {
    let Setup { kind, problem } = setup(cfg, problem)?;
    let u = load("solution", solution, formats::decode_solution)?;
    shapes_match(&problem.value, &u.value)?;
    let rows = cfg
        .certify
        .n_alpha
        .iter()
        .map(|&n| coarea_check_two_class(&u.value, &problem.value, Some(&kind), n, &cfg.solver.dloc))
        .collect::<mcrelax::Result<Vec<_>>>()?;
    let mut report = Report::new(
        "coarea",
        problem.value.shape(),
        cfg.regularizer.clone(),
        Provenance::new(cfg.digest(), vec![problem.digest, u.digest]),
    );
    report.coarea = rows;
    finish(report, out)
}
