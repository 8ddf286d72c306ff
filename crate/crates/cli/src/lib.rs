//! Command-line pipeline around `trialeq-core`: configuration, staged runs,
//! stamped CSV/JSON results, a run manifest and plot-ready figure tables.

pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod pipeline;
pub mod stages;
pub mod stats_cmd;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
pub use pipeline::{run_pipeline, RunManifest};
