//! Command-line driver: configuration, orchestration and CSV/JSON/SVG output.

pub mod config;
pub mod run;
mod svg;

pub use config::{Cli, Command, ConfigError, Format, Operator, RunConfig};
pub use run::{run, Outcome, RunError};

/// Environment variable capping the worker threads.
pub const THREADS_VAR: &str = "SPECTRAL_PORTRAIT_THREADS";

/// Size the global thread pool from [`THREADS_VAR`], if set.
pub fn init_threads() -> Result<(), ConfigError> {
    let Ok(value) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError(format!("{THREADS_VAR} = '{value}' is not a positive integer")))?;
    // A pool built earlier in the process keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
