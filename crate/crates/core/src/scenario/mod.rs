//! Batch scenarios: configuration, visibility screening, parallel solves,
//! tangential-altitude statistics and file output.

mod config;
mod engine;
mod links;
mod output;
mod setup;

use thiserror::Error;

pub use config::{
    EpochSpan, FrequencyConfig, MediumConfig, MediumKind, MoonOrbit, ReceiverConfig,
    ScenarioConfig, SurfaceUser, TransmitterGroup, WeatherGrid, DEFAULT_BIN_EDGES_KM,
};
pub use engine::{
    bin_index, link_seed, run_scenario, BinRow, BinSummary, Category, ConvergenceStats, Counts,
    Diagnostic, LinkRecord, MetricStats, RunOptions, RunOutput, TaskKey, SUMMARY_METRICS,
};
pub use links::{elevation_deg, enumerate_links, link_geometry, LinkGeometry, Visibility};
pub use output::{
    emit_outputs, execute, preflight, summary_file_name, RunReport, HISTOGRAM_METRICS, RECORD_COLUMNS,
};
pub use setup::{plane_normal, Frequency, Receiver, Scenario, SurfaceSite, Transmitter};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(String),
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("unknown config keys:\n  {}", .0.join("\n  "))]
    UnknownKeys(Vec<String>),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    pub fn invalid(field: &str, reason: impl ToString) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            reason: reason.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("output error: {0}")]
    Io(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("all {attempted} attempted links failed ({non_converged} non-converged, {failed} errors)")]
    AllLinksFailed {
        attempted: usize,
        non_converged: usize,
        failed: usize,
    },
}

impl ScenarioError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) => 1,
            ScenarioError::Io(_) | ScenarioError::Runtime(_) => 2,
            ScenarioError::AllLinksFailed { .. } => 3,
        }
    }
}
