//! Estimation of outcome-model parameters under two-phase outcome-dependent
//! sampling, combining the conditional likelihood of the phase-2 sample with
//! empirical-likelihood constraints built from phase-1 auxiliary information.

pub mod constraints;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod io;
pub mod model;
pub mod numerics;
pub mod sim;

pub use error::{Error, Result};
