//! Command-line front end of `mcrelax`: binary file formats, run
//! configuration, synthetic problems, JSON reports and the subcommands.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod phantom;
pub mod report;

pub use config::RunConfig;
pub use error::CliError;
pub use report::Report;

/// Builds the global worker pool from `MCRELAX_THREADS` (unset or 0: one
/// worker per core).
pub fn init_threads(var: Option<&str>) -> Result<usize, CliError> {
    let n = match var.map(str::trim) {
        None | Some("") => 0,
        Some(v) => v
            .parse::<usize>()
            .map_err(|_| CliError::Validation(format!("MCRELAX_THREADS must be a count, got {v:?}")))?,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(format!("cannot start worker pool: {e}")))?;
    Ok(rayon::current_num_threads())
}
