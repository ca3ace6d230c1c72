//! Command-line frontend for the TDAS toolkit.
//!
//! Each subcommand writes its artifacts plus a `run.json` manifest into an
//! output directory. [`run_from_args`] is the in-process entry point used by
//! the binary and the tests.

use std::ffi::OsString;
use std::fmt;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod manifest;

pub use commands::bench::{time_apply_tdas, BenchArgs};
pub use commands::calibrate::CalibrateArgs;
pub use commands::make_data::MakeDataArgs;
pub use commands::sample::SampleArgs;
pub use commands::stats::StatsArgs;
pub use commands::validate::ValidateArgs;
pub use config::{ModelConfig, SampleConfig, SampleMode};
pub use manifest::{RunManifest, RUN_MANIFEST};

#[derive(Debug, Parser)]
#[command(name = "tdas", version, about = "Target distribution aware sampling toolkit")]
pub struct Cli {
    /// Maximum number of worker threads (default: all cores). Outputs do not
    /// depend on this value.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset.
    MakeData(MakeDataArgs),
    /// Run the annealed Langevin sampler, vanilla or filtered.
    Sample(SampleArgs),
    /// Fit frequency-filter parameters from reference and generated samples.
    Calibrate(CalibrateArgs),
    /// Mean spectral power of a sample directory.
    Stats(StatsArgs),
    /// Numerical checks and sample-quality metrics.
    Validate(ValidateArgs),
    /// Time the filter application across resolutions.
    Bench(BenchArgs),
}

/// A check ran to completion and did not pass. Maps to exit code 2.
#[derive(Debug)]
pub struct ValidationFailure(pub String);

impl fmt::Display for ValidationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "validation failed: {}", self.0)
    }
}

impl std::error::Error for ValidationFailure {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ValidationFailure>().is_some() {
        2
    } else {
        1
    }
}

/// Tag for the error line: the core error kind when there is one.
pub fn error_kind(err: &anyhow::Error) -> &'static str {
    if err.downcast_ref::<ValidationFailure>().is_some() {
        return "validation";
    }
    err.chain()
        .find_map(|e| e.downcast_ref::<tdas_core::Error>())
        .map(|e| e.kind())
        .unwrap_or("cli")
}

/// One JSON object on one line, e.g. `{"error":"io","message":"..."}`.
pub fn error_line(err: &anyhow::Error) -> String {
    let message = format!("{err:#}").replace('\n', " ");
    serde_json::json!({ "error": error_kind(err), "message": message }).to_string()
}

/// Error line for a rejected command line; keeps clap's first line only.
pub fn usage_error_line(err: &anyhow::Error) -> String {
    let text = err.to_string();
    let first = text.lines().next().unwrap_or_default();
    let message = first.strip_prefix("error: ").unwrap_or(first);
    serde_json::json!({ "error": "usage", "message": message }).to_string()
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let Cli { jobs, command } = cli;
    let work = move || match command {
        Command::MakeData(a) => commands::make_data::run(&a).map(drop),
        Command::Sample(a) => commands::sample::run(&a).map(drop),
        Command::Calibrate(a) => commands::calibrate::run(&a).map(drop),
        Command::Stats(a) => commands::stats::run(&a).map(drop),
        Command::Validate(a) => commands::validate::run(&a),
        Command::Bench(a) => commands::bench::run(&a).map(drop),
    };
    match jobs {
        Some(0) => anyhow::bail!("--jobs must be at least 1"),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(work),
        None => work(),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from_args<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}
