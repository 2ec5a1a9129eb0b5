use serde::{Deserialize, Serialize};

use super::outcome::Family;
use crate::error::{Error, Result};
use crate::numerics::{expit, YLaw};

/// Working model `f(y | x; θ)` for phase-1 data, used only through its score
/// `h(y, x; θ) = (y − m(θᵀx̃)) x̃` with `x̃ = (1, x[x_cols])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingModel {
    pub family: Family,
    pub x_cols: Vec<usize>,
    /// Residual variance of the Gaussian working density; needed only for
    /// truncated expectations under a proper support.
    #[serde(default)]
    pub aux_variance: Option<f64>,
}

impl WorkingModel {
    pub fn new(family: Family, x_cols: Vec<usize>) -> Self {
        WorkingModel { family, x_cols, aux_variance: None }
    }

    pub fn dim(&self) -> usize {
        1 + self.x_cols.len()
    }

    pub fn theta_names(&self, x_names: &[String]) -> Vec<String> {
        let mut out = vec!["theta:(Intercept)".to_string()];
        out.extend(self.x_cols.iter().map(|&c| format!("theta:{}", x_names[c])));
        out
    }

    pub fn design(&self, x: &[f64]) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.dim());
        d.push(1.0);
        d.extend(self.x_cols.iter().map(|&c| x[c]));
        d
    }

    pub fn mean_d(&self, d: &[f64], theta: &[f64]) -> f64 {
        let eta: f64 = d.iter().zip(theta).map(|(a, b)| a * b).sum();
        match self.family {
            Family::Logistic => expit(eta),
            Family::LinearGaussian => eta,
        }
    }

    pub fn score_d_into(&self, y: f64, d: &[f64], theta: &[f64], out: &mut [f64]) {
        let res = y - self.mean_d(d, theta);
        for (o, v) in out.iter_mut().zip(d) {
            *o = res * v;
        }
    }

    /// `h(y, x; θ)`.
    pub fn score(&self, y: f64, x: &[f64], theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.score_d_into(y, &self.design(x), theta, &mut out);
        out
    }

    /// Working law of `Y` given `x`.
    pub fn law(&self, x: &[f64], theta: &[f64]) -> Result<YLaw> {
        let d = self.design(x);
        let m = self.mean_d(&d, theta);
        match self.family {
            Family::Logistic => Ok(YLaw::Bernoulli { p1: m }),
            Family::LinearGaussian => match self.aux_variance {
                Some(v) if v > 0.0 && v.is_finite() => Ok(YLaw::Gaussian { mean: m, sd: v.sqrt() }),
                Some(v) => Err(Error::Domain(format!("working variance {v} must be positive"))),
                None => Err(Error::Input("linear working model needs aux_variance for truncated expectations".into())),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn working_scores_reference() {
        let lin = WorkingModel::new(Family::LinearGaussian, vec![0]);
        assert_eq!(lin.score(2.0, &[3.0], &[0.0, 0.0]), vec![2.0, 6.0]);
        let lg = WorkingModel::new(Family::Logistic, vec![0]);
        assert_eq!(lg.score(1.0, &[0.0], &[0.0, 0.0]), vec![0.5, 0.0]);
        assert!(lin.law(&[0.0], &[0.0, 0.0]).is_err());
    }
}
