use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{expit, softplus, YLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logistic,
    LinearGaussian,
}

/// Which phase-1 (`x`) and phase-2 (`z`) columns enter a linear predictor,
/// after an intercept.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CovariateLayout {
    pub x_cols: Vec<usize>,
    pub z_cols: Vec<usize>,
}

/// `f(y | x, z; β)`. For the linear-Gaussian family the last coordinate of
/// `β` is the residual variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub family: Family,
    pub layout: CovariateLayout,
}

impl OutcomeModel {
    pub fn new(family: Family, layout: CovariateLayout) -> Self {
        OutcomeModel { family, layout }
    }

    pub fn n_coef(&self) -> usize {
        1 + self.layout.x_cols.len() + self.layout.z_cols.len()
    }

    pub fn dim(&self) -> usize {
        match self.family {
            Family::Logistic => self.n_coef(),
            Family::LinearGaussian => self.n_coef() + 1,
        }
    }

    pub fn beta_names(&self, x_names: &[String], z_names: &[String]) -> Vec<String> {
        let mut out = vec!["(Intercept)".to_string()];
        out.extend(self.layout.x_cols.iter().map(|&c| x_names[c].clone()));
        out.extend(self.layout.z_cols.iter().map(|&c| z_names[c].clone()));
        if self.family == Family::LinearGaussian {
            out.push("sigma2".into());
        }
        out
    }

    /// Design vector `(1, x[x_cols], z[z_cols])`.
    pub fn design(&self, x: &[f64], z: &[f64]) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.n_coef());
        d.push(1.0);
        d.extend(self.layout.x_cols.iter().map(|&c| x[c]));
        d.extend(self.layout.z_cols.iter().map(|&c| z[c]));
        d
    }

    fn check(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.dim() {
            return Err(Error::Input(format!("beta has length {}, expected {}", beta.len(), self.dim())));
        }
        if self.family == Family::LinearGaussian {
            let v = beta[self.n_coef()];
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("outcome variance {v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn linear_predictor(&self, d: &[f64], beta: &[f64]) -> f64 {
        d.iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    /// Conditional law of `Y` given the design vector.
    pub fn law(&self, d: &[f64], beta: &[f64]) -> Result<YLaw> {
        self.check(beta)?;
        let eta = self.linear_predictor(d, beta);
        if !eta.is_finite() {
            return Err(Error::Numeric {
                what: "non-finite linear predictor".into(),
                location: format!("design {d:?}"),
            });
        }
        Ok(match self.family {
            Family::Logistic => YLaw::Bernoulli { p1: expit(eta) },
            Family::LinearGaussian => YLaw::Gaussian { mean: eta, sd: beta[self.n_coef()].sqrt() },
        })
    }

    pub fn logpdf_d(&self, y: f64, d: &[f64], beta: &[f64]) -> Result<f64> {
        self.check(beta)?;
        let eta = self.linear_predictor(d, beta);
        match self.family {
            Family::Logistic => {
                check_binary(y)?;
                Ok(y * eta - softplus(eta))
            }
            Family::LinearGaussian => {
                let v = beta[self.n_coef()];
                let r = y - eta;
                Ok(-0.5 * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * r * r / v)
            }
        }
    }

    /// `∂ log f / ∂β`, written into `out`.
    pub fn score_d_into(&self, y: f64, d: &[f64], beta: &[f64], out: &mut [f64]) {
        let eta = self.linear_predictor(d, beta);
        match self.family {
            Family::Logistic => {
                let res = y - expit(eta);
                for (o, v) in out.iter_mut().zip(d) {
                    *o = res * v;
                }
            }
            Family::LinearGaussian => {
                let k = self.n_coef();
                let v = beta[k];
                let r = y - eta;
                for (o, dv) in out[..k].iter_mut().zip(d) {
                    *o = r * dv / v;
                }
                out[k] = 0.5 * (r * r / v - 1.0) / v;
            }
        }
    }

    pub fn logpdf(&self, y: f64, x: &[f64], z: &[f64], beta: &[f64]) -> Result<f64> {
        self.logpdf_d(y, &self.design(x, z), beta)
    }

    pub fn score(&self, y: f64, x: &[f64], z: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
        self.check(beta)?;
        if self.family == Family::Logistic {
            check_binary(y)?;
        }
        let mut out = vec![0.0; self.dim()];
        self.score_d_into(y, &self.design(x, z), beta, &mut out);
        Ok(out)
    }
}

pub(crate) fn check_binary(y: f64) -> Result<()> {
    if y == 0.0 || y == 1.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("binary outcome expected, got {y}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::expit;

    fn logistic() -> OutcomeModel {
        OutcomeModel::new(Family::Logistic, CovariateLayout { x_cols: vec![0], z_cols: vec![0] })
    }

    fn linear() -> OutcomeModel {
        OutcomeModel::new(Family::LinearGaussian, CovariateLayout { x_cols: vec![0], z_cols: vec![0] })
    }

    #[test]
    fn logistic_logpdf_reference() {
        let v = logistic().logpdf(1.0, &[0.0], &[0.0], &[-4.0, 1.0, 1.0]).unwrap();
        assert!((v - expit(-4.0).ln()).abs() < 1e-14);
        assert!((expit(-4.0) - 0.017986).abs() < 1e-6);
        let v = logistic().logpdf(1.0, &[0.0], &[0.0], &[0.0, 1.0, 1.0]).unwrap();
        assert!((v - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_logpdf_at_mean() {
        let v = linear().logpdf(0.0, &[0.0], &[0.0], &[0.0, 1.0, 1.0, 4.0]).unwrap();
        assert!((v - (1.0 / (8.0 * std::f64::consts::PI).sqrt()).ln()).abs() < 1e-14);
    }

    #[test]
    fn scores_reference() {
        let s = logistic().score(1.0, &[0.0], &[0.0], &[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(s, vec![0.5, 0.0, 0.0]);
        let s = linear().score(2.0, &[1.0], &[1.0], &[0.0, 1.0, 1.0, 4.0]).unwrap();
        assert_eq!(&s[..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(linear().logpdf(0.0, &[0.0], &[0.0], &[0.0, 1.0, 1.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(logistic().logpdf(0.5, &[0.0], &[0.0], &[0.0, 1.0, 1.0]), Err(Error::Input(_))));
    }
}
