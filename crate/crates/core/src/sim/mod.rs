//! Coupled simulation of the augmented state and the critic weights.

mod dither;
mod episode;
mod integrate;
mod metrics;

pub use dither::dither;
pub use episode::{
    run_episode, run_episode_with_sink, EpisodeError, ExperimentResult, SimConfig, TelemetryRecord,
    TelemetrySink,
};
pub use integrate::{rk4_step, Rk4};
pub use metrics::{convergence_time, max_abs_input, steady_state_error};
