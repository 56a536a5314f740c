//! Command-line front end for the `ndis-core` library.

pub mod commands;
pub mod error;
pub mod io;
pub mod metrics;

pub use commands::{run, Cli, ExperimentConfig};
pub use error::{CliError, Result};
pub use io::{load_csv, parse_csv};

/// JSON schema of `is-curve` output.
pub const IS_CURVE_SCHEMA: &str = include_str!("../schemas/is_curve.schema.json");
/// JSON schema of `mechanism` output.
pub const MECHANISM_SCHEMA: &str = include_str!("../schemas/mechanism.schema.json");
/// JSON schema of `metrics` output.
pub const METRICS_SCHEMA: &str = include_str!("../schemas/metrics.schema.json");
/// JSON schema of `gl` output.
pub const GL_SCHEMA: &str = include_str!("../schemas/gl.schema.json");

/// Worker count from `NDIS_THREADS`; one thread when unset or unparsable.
pub fn thread_count(var: Option<&str>) -> usize {
    var.and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
        .unwrap_or(1)
}
