//! Monte Carlo harness for the simulation designs.

mod generate;
mod replicate;
mod scenario;
mod survey;

pub use generate::{generate_phase1, phase2_sample, simulate_dataset};
pub use replicate::{
    run_replications, theta_star, EstimatorSummary, ParamSummary, SimReport, UNRELIABLE_FAILURE_RATE, Z95,
};
pub use scenario::{Design, ScenarioConfig, PRESETS};
pub use survey::{survey_dataset, SURVEY_BETA, SURVEY_N};
