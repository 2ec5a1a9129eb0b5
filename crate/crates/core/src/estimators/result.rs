//! Fitted-estimator output shared by every estimator.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constraints::{RankReport, Variant};
use crate::numerics::Conditioning;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm of the objective gradient (or estimating equation) at the solution.
    pub gradient_max: f64,
    /// `max |Σ p̂_i g_i|` for empirical-likelihood fits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum_p: Option<f64>,
    /// Condition number of the matrix inverted for the covariance.
    pub condition_number: f64,
    pub conditioning: Conditioning,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<RankReport>,
    /// Set when jittered restarts reached different profile values.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multimodal: Option<bool>,
    pub jacobian: String,
    pub warnings: Vec<String>,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            converged: false,
            iterations: 0,
            gradient_max: f64::NAN,
            constraint_residual: None,
            sum_p: None,
            condition_number: f64::NAN,
            conditioning: Conditioning::Good,
            rank: None,
            multimodal: None,
            jacobian: "analytic".into(),
            warnings: Vec::new(),
        }
    }
}

/// One reported coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub estimator: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    pub beta_names: Vec<String>,
    pub beta: Vec<f64>,
    pub beta_se: Vec<f64>,
    /// Row-major covariance of `β̂`.
    pub beta_cov: Vec<Vec<f64>>,
    /// Selection parameters used (fixed or estimated).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// The optimized parameter vector and its names.
    pub eta_names: Vec<String>,
    pub eta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_cov: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub lambda: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub p_hat: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile_loglik: Option<f64>,
    pub diagnostics: Diagnostics,
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl FitResult {
    /// Coefficients as reported: a variance coordinate `sigma2` is shown as
    /// `sigma` with a delta-method standard error.
    pub fn reported(&self) -> Vec<Coefficient> {
        self.beta_names
            .iter()
            .zip(self.beta.iter().zip(&self.beta_se))
            .map(|(name, (&b, &se))| {
                if name == "sigma2" {
                    let s = b.max(0.0).sqrt();
                    Coefficient { name: "sigma".into(), estimate: s, se: se / (2.0 * s) }
                } else {
                    Coefficient { name: name.clone(), estimate: b, se }
                }
            })
            .collect()
    }

    pub fn beta_cov_matrix(&self) -> DMatrix<f64> {
        let k = self.beta.len();
        DMatrix::from_fn(k, k, |i, j| self.beta_cov[i][j])
    }
}
