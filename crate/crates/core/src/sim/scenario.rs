//! Simulation designs and named presets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorContext, EstimatorKind, FitOptions};
use crate::model::{
    CovariateLayout, Family, ModelSpec, OutcomeModel, SelectionModel, SelectionTerm, WorkingModel, XCells,
};
use crate::numerics::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// Binary outcome; `x` is a three-level categorization of a normal
    /// covariate correlated with the expensive `z`; logistic selection on `y`.
    LogisticExpensive,
    /// Binary outcome depending on `z` only; `x` is a normal surrogate.
    LogisticSurrogate,
    /// Gaussian outcome on categorized `x` and `z`; only the tails of `y` are sampled.
    LinearExpensive,
    /// Gaussian outcome on `z` only with a surrogate `x`; tail sampling.
    LinearSurrogate,
}

impl Design {
    pub fn is_binary(&self) -> bool {
        matches!(self, Design::LogisticExpensive | Design::LogisticSurrogate)
    }

    pub fn has_categorized_x(&self) -> bool {
        matches!(self, Design::LogisticExpensive | Design::LinearExpensive)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub design: Design,
    /// Phase-1 size.
    pub n: usize,
    /// Outcome parameters; the last entry is the residual variance for Gaussian outcomes.
    pub beta0: Vec<f64>,
    pub alpha0: Vec<f64>,
    /// Correlation of the normal pair behind `(x, z)`.
    pub rho: f64,
    /// Cut points categorizing `x` (expensive designs) or defining the
    /// post-stratification cells of a continuous `x`.
    pub x_cuts: Vec<f64>,
    /// Lower and upper tail cut points for the stratified designs.
    #[serde(default)]
    pub y_cuts: Option<[f64; 2]>,
    pub replications: usize,
    pub master_seed: u64,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub fit_options: FitOptions,
    /// Limit of the working-model fit; computed by a large simulation when
    /// absent and needed.
    #[serde(default)]
    pub theta_star: Option<Vec<f64>>,
    #[serde(default = "default_theta_star_draws")]
    pub theta_star_draws: usize,
}

fn default_theta_star_draws() -> usize {
    400_000
}

/// Preset names accepted by [`ScenarioConfig::preset`].
pub const PRESETS: [&str; 8] =
    ["table1", "table1-small", "table2", "table2-rho07", "table3", "table3-small", "table4", "table5"];

impl ScenarioConfig {
    /// Designs of the simulation tables at desk scale (200 replications).
    pub fn preset(name: &str) -> Result<Self> {
        use EstimatorKind as K;
        let el5 = K::El { family: 5, ps: false, known_pi: false };
        let el5ps = K::El { family: 5, ps: true, known_pi: false };
        let binary_estimators = vec![K::CmlPi, K::CmlPiHat, K::CmlPs, K::Sw, K::SwPs, el5, el5ps];
        let linear_estimators = vec![K::CmlPi, K::CmlPiHat, K::CmlPs, K::Sw, K::SwPs, el5, el5ps];
        let base =
            |design, n, beta0: Vec<f64>, alpha0: Vec<f64>, rho, x_cuts: Vec<f64>, y_cuts, estimators| ScenarioConfig {
                design,
                n,
                beta0,
                alpha0,
                rho,
                x_cuts,
                y_cuts,
                replications: 200,
                master_seed: 20240601,
                estimators,
                fit_options: FitOptions::default(),
                theta_star: None,
                theta_star_draws: default_theta_star_draws(),
            };
        let tert = vec![-0.44, 0.44];
        Ok(match name {
            "table1" | "table1-small" => base(
                Design::LogisticExpensive,
                if name == "table1" { 8000 } else { 2000 },
                vec![-4.0, 1.0, 1.0],
                vec![-3.5, 2.3],
                0.1,
                tert,
                None,
                binary_estimators,
            ),
            "table2" | "table2-rho07" => base(
                Design::LogisticSurrogate,
                8000,
                vec![-3.3, 1.0],
                vec![-3.5, 3.5],
                if name == "table2" { 0.9 } else { 0.7 },
                tert,
                None,
                binary_estimators,
            ),
            "table3" | "table3-small" => base(
                Design::LinearExpensive,
                if name == "table3" { 2000 } else { 300 },
                vec![0.0, 1.0, 1.0, 4.0],
                vec![0.3, 0.5],
                0.1,
                tert,
                Some([-0.63, 2.63]),
                linear_estimators,
            ),
            "table4" | "table5" => base(
                Design::LinearSurrogate,
                if name == "table4" { 300 } else { 2000 },
                vec![0.0, 1.0, 4.0],
                vec![0.3, 0.5],
                0.9,
                tert,
                Some([-1.52, 1.52]),
                linear_estimators,
            ),
            other => {
                return Err(Error::Config(format!("unknown preset {other:?}; expected one of {}", PRESETS.join(", "))))
            }
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 50 {
            return Err(Error::Config(format!("n = {} is below the minimum of 50", self.n)));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho = {} must lie in (-1, 1)", self.rho)));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("the estimator list is empty".into()));
        }
        if self.x_cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("x cut points must increase".into()));
        }
        let spec = self.model_spec()?;
        if self.beta0.len() != spec.outcome.dim() {
            return Err(Error::Config(format!(
                "beta0 has length {}, expected {}",
                self.beta0.len(),
                spec.outcome.dim()
            )));
        }
        if self.alpha0.len() != spec.selection.dim() {
            return Err(Error::Config(format!(
                "alpha0 has length {}, expected {}",
                self.alpha0.len(),
                spec.selection.dim()
            )));
        }
        if !self.design.is_binary() && self.beta0.last().is_none_or(|v| *v <= 0.0) {
            return Err(Error::Config("the residual variance in beta0 must be positive".into()));
        }
        Ok(())
    }

    fn y_strata(&self) -> Result<Vec<Interval>> {
        let [lo, hi] =
            self.y_cuts.ok_or_else(|| Error::Config("this design needs y_cuts for its outcome strata".into()))?;
        if lo >= hi {
            return Err(Error::Config("y_cuts must increase".into()));
        }
        Ok(vec![Interval::below(lo), Interval::above(hi)])
    }

    /// Cell boundaries on the observed `x` scale.
    fn x_cell_cuts(&self) -> Vec<f64> {
        if self.design.has_categorized_x() {
            (0..self.x_cuts.len()).map(|k| k as f64 + 0.5).collect()
        } else {
            self.x_cuts.clone()
        }
    }

    /// Outcome, working and design selection models.
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let (family, layout) = match self.design {
            Design::LogisticExpensive => (Family::Logistic, CovariateLayout { x_cols: vec![0], z_cols: vec![0] }),
            Design::LogisticSurrogate => (Family::Logistic, CovariateLayout { x_cols: vec![], z_cols: vec![0] }),
            Design::LinearExpensive => (Family::LinearGaussian, CovariateLayout { x_cols: vec![0], z_cols: vec![0] }),
            Design::LinearSurrogate => (Family::LinearGaussian, CovariateLayout { x_cols: vec![], z_cols: vec![0] }),
        };
        let selection = if self.design.is_binary() {
            SelectionModel::logistic(vec![SelectionTerm::Intercept, SelectionTerm::Y])
        } else {
            SelectionModel::stratified(self.y_strata()?, None)?
        };
        Ok(ModelSpec::new(OutcomeModel::new(family, layout), WorkingModel::new(family, vec![0]), selection))
    }

    /// Richer selection model used by the post-stratified estimators.
    pub fn post_stratification(&self) -> Result<SelectionModel> {
        let cuts = self.x_cell_cuts();
        match self.design {
            Design::LogisticExpensive => {
                let cells = XCells::from_cuts(0, &cuts)?;
                let mut terms = vec![SelectionTerm::Intercept, SelectionTerm::Y];
                terms.extend(cells.cells[1..].iter().map(|c| SelectionTerm::XIndicator { col: 0, cell: *c }));
                Ok(SelectionModel::logistic(terms))
            }
            Design::LogisticSurrogate => Ok(SelectionModel::logistic(vec![
                SelectionTerm::Intercept,
                SelectionTerm::Y,
                SelectionTerm::X { col: 0 },
            ])),
            Design::LinearExpensive | Design::LinearSurrogate => {
                SelectionModel::stratified(self.y_strata()?, Some(XCells::from_cuts(0, &cuts)?))
            }
        }
    }

    /// Known selection parameters, `θ*` and the post-stratification model.
    pub fn estimator_context(&self, theta_star: Option<Vec<f64>>) -> Result<EstimatorContext> {
        Ok(EstimatorContext {
            alpha_known: Some(self.alpha0.clone()),
            theta_star,
            post_stratification: Some(self.post_stratification()?),
        })
    }

    /// True values in reporting order (a variance is reported as a standard deviation).
    pub fn reported_truth(&self) -> Vec<f64> {
        let mut t = self.beta0.clone();
        if !self.design.is_binary() {
            let v = t.pop().expect("validated");
            t.push(v.sqrt());
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            ScenarioConfig::preset(p).unwrap().validate().unwrap();
        }
        assert!(ScenarioConfig::preset("table9").is_err());
    }

    #[test]
    fn post_stratification_dimensions() {
        assert_eq!(ScenarioConfig::preset("table1").unwrap().post_stratification().unwrap().dim(), 4);
        assert_eq!(ScenarioConfig::preset("table2").unwrap().post_stratification().unwrap().dim(), 3);
        assert_eq!(ScenarioConfig::preset("table3").unwrap().post_stratification().unwrap().dim(), 6);
        assert_eq!(ScenarioConfig::preset("table5").unwrap().post_stratification().unwrap().dim(), 6);
    }
}
