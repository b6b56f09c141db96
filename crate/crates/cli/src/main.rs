use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mcrelax::RngSpec;
use mcrelax_cli::commands::{cmd_certify, cmd_coarea, cmd_round, cmd_solve, cmd_synth};
use mcrelax_cli::formats::decode_ppm;
use mcrelax_cli::phantom::{Phantom, SynthParams};
use mcrelax_cli::{init_threads, CliError, Report, RunConfig};

/// Convex multiclass image labeling: solve, round and certify.
///
/// Exit codes: 0 success, 2 validation error, 3 solver or rounding budget
/// exhausted, 4 I/O error. MCRELAX_THREADS caps the worker count (0 = auto).
#[derive(Parser)]
#[command(name = "mcrelax", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic problem file.
    Synth(SynthArgs),
    /// Solve the relaxed problem.
    Solve(RunArgs),
    /// Round a relaxed solution to a label map.
    Round(RunArgs),
    /// Certify a relaxed solution with a priori and a posteriori bounds.
    Certify(RunArgs),
    /// Compare a two-class solution with the average of its thresholdings.
    Coarea(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// two-class-split, triple-junction, stripes or noisy-prototypes.
    #[arg(long)]
    phantom: Phantom,
    #[arg(long, default_value_t = 16)]
    width: usize,
    #[arg(long, default_value_t = 16)]
    height: usize,
    #[arg(long)]
    labels: Option<usize>,
    #[arg(long, default_value_t = 4.0)]
    strength: f64,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 2)]
    period: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// PPM (P6) input for noisy-prototypes.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Prototype color "r,g,b" in image sample units; repeat per label.
    #[arg(long = "prototype", value_parser = parse_rgb)]
    prototypes: Vec<[f64; 3]>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Solution file: written by solve, read by the other commands.
    #[arg(long)]
    solution: Option<PathBuf>,
    /// Dual file: written by solve, read by certify.
    #[arg(long)]
    dual: Option<PathBuf>,
    /// Label map written by round.
    #[arg(long)]
    pgm: Option<PathBuf>,
    /// Report path; the report goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
}

fn parse_rgb(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| format!("expected r,g,b, got {s:?}"))
}

fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let bytes = mcrelax_cli::commands::read_bytes(path)?;
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::Validation(format!("{}: not UTF-8", path.display())))?;
            RunConfig::from_json(&text).map_err(CliError::Validation)?
        }
        None => RunConfig::default(),
    };
    let io = &mut cfg.io;
    for (flag, slot) in [
        (&args.problem, &mut io.problem),
        (&args.solution, &mut io.solution),
        (&args.dual, &mut io.dual),
        (&args.pgm, &mut io.pgm),
        (&args.out, &mut io.out),
    ] {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    if let Some(seed) = args.seed {
        cfg.rounding.seed = seed;
    }
    if let Some(n) = args.samples {
        cfg.rounding.n_samples = n;
    }
    cfg.validate().map_err(CliError::Validation)?;
    Ok(cfg)
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref().ok_or_else(|| CliError::Validation(format!("missing --{flag} (or io.{flag} in the config)")))
}

fn run(cli: Cli) -> Result<Option<Report>, CliError> {
    let (cfg, which) = match cli.command {
        Command::Synth(a) => {
            let image = match &a.image {
                Some(path) => {
                    let bytes = mcrelax_cli::commands::read_bytes(path)?;
                    Some(decode_ppm(&bytes).map_err(|source| CliError::Format { path: path.clone(), source })?)
                }
                None => None,
            };
            let params = SynthParams {
                width: a.width,
                height: a.height,
                labels: a.labels,
                strength: a.strength,
                noise: a.noise,
                period: a.period,
                rng: RngSpec::new(a.seed, a.stream),
                image,
                prototypes: a.prototypes,
            };
            cmd_synth(a.phantom, &params, &a.out)?;
            return Ok(None);
        }
        Command::Solve(a) => (load_config(&a)?, "solve"),
        Command::Round(a) => (load_config(&a)?, "round"),
        Command::Certify(a) => (load_config(&a)?, "certify"),
        Command::Coarea(a) => (load_config(&a)?, "coarea"),
    };
    let io = &cfg.io;
    let problem = required(&io.problem, "problem")?;
    let solution = required(&io.solution, "solution")?;
    let out = io.out.as_deref();
    let report = match which {
        "solve" => cmd_solve(&cfg, problem, solution, io.dual.as_deref(), out)?,
        "round" => cmd_round(&cfg, problem, solution, io.pgm.as_deref(), out)?,
        "certify" => cmd_certify(&cfg, problem, solution, io.dual.as_deref(), out)?,
        _ => cmd_coarea(&cfg, problem, solution, out)?,
    };
    Ok(out.is_none().then_some(report))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads(std::env::var("MCRELAX_THREADS").ok().as_deref()).and_then(|_| run(cli));
    match result {
        Ok(Some(report)) => {
            print!("{}", report.to_json());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mcrelax: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
