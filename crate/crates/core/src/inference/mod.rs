//! Sandwich covariances, closed-form asymptotic variances and Wald summaries.

mod avar;
mod sandwich;
mod wald;

pub use avar::{closed_form_avar, estimate_moment_blocks, AvarKind, MomentBlocks};
pub use sandwich::{just_identified_variance, outer_mean, plugin_variance, sandwich_variance, Covariance, PluginTerm};
pub use wald::{wald_row, wald_summary, WaldRow};
