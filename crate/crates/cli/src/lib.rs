//! Front end for the `krflow` engines: config ingestion, the shipped
//! scenario registry, execution, and file emission.
//!
//! Exit-code contract: `0` success, `2` singularity-reached with partial
//! output, `1` input error.

pub mod config;
pub mod exec;
pub mod scenario;

pub use config::{parse_config, ConfigError, Mode, Overrides, RunConfig};
pub use exec::{execute, ExecReport};
pub use scenario::{registry_names, run_scenario, ScenarioOutput};
