//! Outcome, working and selection models, the phase-1 data container and the
//! biased-sampling conditional density.

pub mod conditional;
pub mod data;
pub mod outcome;
pub mod selection;
pub mod working;

pub use conditional::{
    cond_score_alpha, cond_score_beta, conditional_density_fc, log_fc, working_score, CondRule, ModelSpec,
};
pub use data::{Dataset, ObservationRecord};
pub use outcome::{CovariateLayout, Family, OutcomeModel};
pub use selection::{SelectionForm, SelectionModel, SelectionTerm, XCells};
pub use working::WorkingModel;
