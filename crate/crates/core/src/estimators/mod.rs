//! Conditional likelihood, stacked-score and empirical-likelihood estimators.

mod cml;
mod dual;
mod el;
mod nuisance;
mod result;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cml::{cml_beta, fit_cml, fit_sw, AlphaSource};
pub use dual::{el_inner_lambda, el_inner_lambda_from, DualSolution, InnerOptions};
pub use el::{
    el_profile_gradient, el_profile_loglik, fit_el, fit_el_from, init_strategy, ElEstimator, FitOptions, InitialValues,
    ThetaSource,
};
pub use nuisance::{fit_selection_mle, fit_working, WorkingFit};
pub use result::{Coefficient, Diagnostics, FitResult};

use crate::constraints::Variant;
use crate::error::{Error, Result};
use crate::model::{Dataset, ModelSpec, SelectionModel};

/// Named estimator, as used in configuration files and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorKind {
    CmlPi,
    CmlPiHat,
    CmlPs,
    Sw,
    SwPs,
    /// Joint empirical likelihood with constraint family 3, 4 or 5.
    El {
        family: u8,
        ps: bool,
        known_pi: bool,
    },
    /// Phase-2 empirical likelihood with known `π`.
    ElPi {
        family: u8,
        theta_hat: bool,
    },
}

impl EstimatorKind {
    pub const ALL_NAMES: [&'static str; 18] = [
        "CML-pi",
        "CML-pihat",
        "CML-ps",
        "SW",
        "SW-ps",
        "EL3",
        "EL4",
        "EL5",
        "EL3-ps",
        "EL4-ps",
        "EL5-ps",
        "EL3-pi",
        "EL4-pi",
        "EL5-pi",
        "EL-pi-thetastar-1",
        "EL-pi-thetastar-2",
        "EL-pi-thetahat-1",
        "EL-pi-thetahat-2",
    ];

    pub fn needs_known_alpha(&self) -> bool {
        matches!(self, EstimatorKind::CmlPi | EstimatorKind::ElPi { .. } | EstimatorKind::El { known_pi: true, .. })
    }

    pub fn needs_theta_star(&self) -> bool {
        matches!(self, EstimatorKind::ElPi { theta_hat: false, .. })
    }

    pub fn needs_post_stratification(&self) -> bool {
        matches!(self, EstimatorKind::CmlPs | EstimatorKind::SwPs | EstimatorKind::El { ps: true, .. })
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorKind::CmlPi => write!(f, "CML-pi"),
            EstimatorKind::CmlPiHat => write!(f, "CML-pihat"),
            EstimatorKind::CmlPs => write!(f, "CML-ps"),
            EstimatorKind::Sw => write!(f, "SW"),
            EstimatorKind::SwPs => write!(f, "SW-ps"),
            EstimatorKind::El { family, ps, known_pi } => {
                write!(f, "EL{family}")?;
                if *ps {
                    write!(f, "-ps")?;
                }
                if *known_pi {
                    write!(f, "-pi")?;
                }
                Ok(())
            }
            EstimatorKind::ElPi { family, theta_hat } => {
                write!(f, "EL-pi-{}-{family}", if *theta_hat { "thetahat" } else { "thetastar" })
            }
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "CML-pi" => EstimatorKind::CmlPi,
            "CML-pihat" => EstimatorKind::CmlPiHat,
            "CML-ps" => EstimatorKind::CmlPs,
            "SW" => EstimatorKind::Sw,
            "SW-ps" => EstimatorKind::SwPs,
            _ => {
                let fam = |c: &str| -> Option<u8> { c.parse().ok() };
                if let Some(rest) = s.strip_prefix("EL-pi-thetastar-") {
                    match fam(rest) {
                        Some(family @ (1 | 2)) => EstimatorKind::ElPi { family, theta_hat: false },
                        _ => return Err(unknown(s)),
                    }
                } else if let Some(rest) = s.strip_prefix("EL-pi-thetahat-") {
                    match fam(rest) {
                        Some(family @ (1 | 2)) => EstimatorKind::ElPi { family, theta_hat: true },
                        _ => return Err(unknown(s)),
                    }
                } else if let Some(rest) = s.strip_prefix("EL") {
                    let (num, suffix) = rest.split_at(rest.len().min(1));
                    let family = match fam(num) {
                        Some(f @ 3..=5) => f,
                        _ => return Err(unknown(s)),
                    };
                    match suffix {
                        "" => EstimatorKind::El { family, ps: false, known_pi: false },
                        "-ps" => EstimatorKind::El { family, ps: true, known_pi: false },
                        "-pi" => EstimatorKind::El { family, ps: false, known_pi: true },
                        _ => return Err(unknown(s)),
                    }
                } else {
                    return Err(unknown(s));
                }
            }
        };
        Ok(kind)
    }
}

fn unknown(s: &str) -> Error {
    Error::Config(format!("unknown estimator {s:?}; expected one of {}", EstimatorKind::ALL_NAMES.join(", ")))
}

impl TryFrom<String> for EstimatorKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EstimatorKind> for String {
    fn from(k: EstimatorKind) -> String {
        k.to_string()
    }
}

/// Inputs some estimators need beyond the data and the model.
#[derive(Debug, Clone, Default)]
pub struct EstimatorContext {
    /// Design values of `α`, for the known-`π` estimators.
    pub alpha_known: Option<Vec<f64>>,
    /// Population limit of `θ`, for the `θ*` estimators.
    pub theta_star: Option<Vec<f64>>,
    /// Richer selection model for post-stratified estimators.
    pub post_stratification: Option<SelectionModel>,
}

impl EstimatorContext {
    fn alpha(&self, kind: EstimatorKind) -> Result<Vec<f64>> {
        self.alpha_known.clone().ok_or_else(|| Error::Config(format!("{kind} needs known selection parameters")))
    }

    fn ps(&self, kind: EstimatorKind) -> Result<SelectionModel> {
        self.post_stratification
            .clone()
            .ok_or_else(|| Error::Config(format!("{kind} needs a post-stratification model")))
    }
}

fn variant_of(family: u8) -> Variant {
    match family {
        1 => Variant::PiTheta1,
        2 => Variant::PiTheta2,
        3 => Variant::Joint3,
        4 => Variant::Joint4,
        _ => Variant::Joint5,
    }
}

/// Run one named estimator.
pub fn run_estimator(
    kind: EstimatorKind,
    data: &Dataset,
    spec: &ModelSpec,
    ctx: &EstimatorContext,
    opts: &FitOptions,
) -> Result<FitResult> {
    let mut fit = match kind {
        EstimatorKind::CmlPi => fit_cml(data, spec, &AlphaSource::Known(ctx.alpha(kind)?)),
        EstimatorKind::CmlPiHat => fit_cml(data, spec, &AlphaSource::Mle),
        EstimatorKind::CmlPs => fit_cml(data, spec, &AlphaSource::PostStratified(ctx.ps(kind)?)),
        EstimatorKind::Sw => fit_sw(data, spec, None),
        EstimatorKind::SwPs => fit_sw(data, spec, Some(&ctx.ps(kind)?)),
        EstimatorKind::El { family, ps, known_pi } => {
            let alpha = if known_pi {
                AlphaSource::Known(ctx.alpha(kind)?)
            } else if ps {
                AlphaSource::PostStratified(ctx.ps(kind)?)
            } else {
                AlphaSource::Mle
            };
            let est = ElEstimator { variant: variant_of(family), alpha, theta: ThetaSource::Estimated };
            fit_el(data, spec, &est, opts)
        }
        EstimatorKind::ElPi { family, theta_hat } => {
            let theta = if theta_hat {
                ThetaSource::Estimated
            } else {
                ThetaSource::Fixed(
                    ctx.theta_star
                        .clone()
                        .ok_or_else(|| Error::Config(format!("{kind} needs the working-model limit theta*")))?,
                )
            };
            let est = ElEstimator { variant: variant_of(family), alpha: AlphaSource::Known(ctx.alpha(kind)?), theta };
            fit_el(data, spec, &est, opts)
        }
    }?;
    fit.estimator = kind.to_string();
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in EstimatorKind::ALL_NAMES {
            let k: EstimatorKind = name.parse().unwrap();
            assert_eq!(k.to_string(), name);
        }
        assert!("EL6".parse::<EstimatorKind>().is_err());
        assert!("EL-pi-thetahat-3".parse::<EstimatorKind>().is_err());
    }
}
