//! File formats, scenario presets and the run/compare drivers behind the
//! `vgcritic` command-line tool.

pub mod config;
pub mod expr;
pub mod run;
pub mod telemetry;

pub use config::{preset, preset_names, ConfigError, Scenario};
pub use run::{compare, run_scenario, Comparison, Metrics, RunError, RunOutcome};
