//! The biased-sampling conditional density
//! `f_c(y | x, z) = f(y | x, z; β) π(y, x; α) / ∫_D f π dy`
//! and its scores. When `D` is proper this is the doubly conditioned `f_cc`.

use serde::{Deserialize, Serialize};

use super::outcome::{Family, OutcomeModel};
use super::selection::SelectionModel;
use super::working::WorkingModel;
use crate::error::{Error, Result};
use crate::numerics::truncnorm::MIN_MASS;
use crate::numerics::{QuadratureMethod, QuadratureSpec, Support, YRule};

/// Outcome, working and selection models plus the outcome quadrature rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub outcome: OutcomeModel,
    pub working: WorkingModel,
    pub selection: SelectionModel,
    pub quadrature: QuadratureSpec,
}

impl ModelSpec {
    /// Picks the quadrature automatically: two-point enumeration for a binary
    /// outcome, closed-form truncated-normal rules for a Gaussian outcome with
    /// piecewise-constant selection, Gauss–Hermite otherwise.
    pub fn new(outcome: OutcomeModel, working: WorkingModel, selection: SelectionModel) -> Self {
        let quadrature = match (outcome.family, selection.is_stratified()) {
            (Family::Logistic, _) => QuadratureSpec::two_point(),
            (Family::LinearGaussian, true) => QuadratureSpec::closed_form(),
            (Family::LinearGaussian, false) => QuadratureSpec::default(),
        };
        ModelSpec { outcome, working, selection, quadrature }
    }

    pub fn with_quadrature(mut self, quadrature: QuadratureSpec) -> Result<Self> {
        if self.outcome.family == Family::LinearGaussian && quadrature.method == QuadratureMethod::TwoPointBinary {
            return Err(Error::Input("two-point quadrature needs a binary outcome".into()));
        }
        if quadrature.method == QuadratureMethod::TruncatedNormalClosedForm && !self.selection.is_stratified() {
            return Err(Error::Input("closed-form quadrature is exact only for piecewise-constant selection".into()));
        }
        self.quadrature = quadrature;
        Ok(self)
    }

    /// The same outcome and working models under a different selection model.
    pub fn with_selection(&self, selection: SelectionModel) -> ModelSpec {
        let auto = ModelSpec::new(self.outcome.clone(), self.working.clone(), selection);
        let q = self.quadrature;
        auto.clone().with_quadrature(q).unwrap_or(auto)
    }

    pub fn support(&self) -> &Support {
        self.selection.support()
    }

    pub fn has_proper_support(&self) -> bool {
        !self.support().is_real_line()
    }

    /// Rule for truncated expectations under the working law.
    pub fn working_quadrature(&self) -> QuadratureSpec {
        match self.working.family {
            Family::Logistic => QuadratureSpec::two_point(),
            Family::LinearGaussian => match self.quadrature.method {
                QuadratureMethod::TwoPointBinary => QuadratureSpec::default(),
                _ => self.quadrature,
            },
        }
    }
}

/// Quadrature nodes for one subject with outcome weights restricted to `D`
/// and the selection probability at every node.
#[derive(Debug, Clone)]
pub struct CondRule {
    pub nodes: Vec<f64>,
    /// `f(y) dy` on `D`.
    pub weights: Vec<f64>,
    pub pi: Vec<f64>,
    /// `∫_D f π dy`.
    pub mass: f64,
}

impl CondRule {
    pub fn new(spec: &ModelSpec, d: &[f64], x: &[f64], beta: &[f64], alpha: &[f64]) -> Result<Self> {
        let law = spec.outcome.law(d, beta)?;
        let rule = YRule::build(&law, spec.support(), &spec.quadrature)?;
        let mut pi = Vec::with_capacity(rule.len());
        let mut mass = 0.0;
        for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
            let p = spec.selection.prob(y, x, alpha)?;
            mass += w * p;
            pi.push(p);
        }
        if !(mass >= MIN_MASS) || !mass.is_finite() {
            return Err(Error::DegenerateConditioning { mass, x: x.to_vec() });
        }
        Ok(CondRule { nodes: rule.nodes, weights: rule.weights, pi, mass })
    }

    /// `f_c(y_k) dy` at node `k`.
    #[inline]
    pub fn fc_weight(&self, k: usize) -> f64 {
        self.weights[k] * self.pi[k] / self.mass
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn check_in_support(spec: &ModelSpec, y: f64) -> Result<()> {
    if spec.support().contains(y) {
        Ok(())
    } else {
        Err(Error::Input(format!("y = {y} lies outside the positive-selection support")))
    }
}

/// `log f_c(y | x, z; β, α)`.
pub fn log_fc(spec: &ModelSpec, y: f64, x: &[f64], z: &[f64], beta: &[f64], alpha: &[f64]) -> Result<f64> {
    check_in_support(spec, y)?;
    let d = spec.outcome.design(x, z);
    let rule = CondRule::new(spec, &d, x, beta, alpha)?;
    let lf = spec.outcome.logpdf_d(y, &d, beta)?;
    let p = spec.selection.prob(y, x, alpha)?;
    Ok(lf + p.ln() - rule.mass.ln())
}

/// `f_c(y | x, z; β, α)`; zero outside `D`.
pub fn conditional_density_fc(
    spec: &ModelSpec,
    y: f64,
    x: &[f64],
    z: &[f64],
    beta: &[f64],
    alpha: &[f64],
) -> Result<f64> {
    if !spec.support().contains(y) {
        return Ok(0.0);
    }
    log_fc(spec, y, x, z, beta, alpha).map(f64::exp)
}

/// `s_cβ = s_β(y) − E_fc[s_β(Y)]`.
pub fn cond_score_beta(
    spec: &ModelSpec,
    y: f64,
    x: &[f64],
    z: &[f64],
    beta: &[f64],
    alpha: &[f64],
) -> Result<Vec<f64>> {
    check_in_support(spec, y)?;
    if spec.outcome.family == Family::Logistic {
        super::outcome::check_binary(y)?;
    }
    let d = spec.outcome.design(x, z);
    let rule = CondRule::new(spec, &d, x, beta, alpha)?;
    let k = spec.outcome.dim();
    let mut out = vec![0.0; k];
    spec.outcome.score_d_into(y, &d, beta, &mut out);
    let mut tmp = vec![0.0; k];
    for j in 0..rule.len() {
        spec.outcome.score_d_into(rule.nodes[j], &d, beta, &mut tmp);
        let w = rule.fc_weight(j);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o -= w * t;
        }
    }
    Ok(out)
}

/// `s_cα = ∂ log π(y) / ∂α − E_fc[∂ log π(Y) / ∂α]`.
pub fn cond_score_alpha(
    spec: &ModelSpec,
    y: f64,
    x: &[f64],
    z: &[f64],
    beta: &[f64],
    alpha: &[f64],
) -> Result<Vec<f64>> {
    check_in_support(spec, y)?;
    let d = spec.outcome.design(x, z);
    let rule = CondRule::new(spec, &d, x, beta, alpha)?;
    let q = spec.selection.dim();
    let mut out = vec![0.0; q];
    spec.selection.dlog_prob_into(y, x, alpha, &mut out)?;
    let mut tmp = vec![0.0; q];
    for j in 0..rule.len() {
        spec.selection.dlog_prob_into(rule.nodes[j], x, alpha, &mut tmp)?;
        let w = rule.fc_weight(j);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o -= w * t;
        }
    }
    Ok(out)
}

/// `h(y, x; θ)`.
pub fn working_score(working: &WorkingModel, y: f64, x: &[f64], theta: &[f64]) -> Vec<f64> {
    working.score(y, x, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::outcome::CovariateLayout;
    use crate::model::selection::SelectionTerm;
    use crate::numerics::{normal, Interval};

    fn binary_spec() -> ModelSpec {
        ModelSpec::new(
            OutcomeModel::new(Family::Logistic, CovariateLayout { x_cols: vec![0], z_cols: vec![0] }),
            WorkingModel::new(Family::Logistic, vec![0]),
            SelectionModel::logistic(vec![SelectionTerm::Intercept, SelectionTerm::Y]),
        )
    }

    #[test]
    fn binary_fc_reference() {
        let spec = binary_spec();
        let v = conditional_density_fc(&spec, 1.0, &[0.0], &[0.0], &[-4.0, 1.0, 1.0], &[-3.5, 2.3]).unwrap();
        let expected = 0.017986 * 0.231475 / (0.017986 * 0.231475 + 0.982014 * 0.029312);
        assert!((v - expected).abs() < 1e-5, "{v} vs {expected}");
        assert!((v - 0.12636).abs() < 1e-5);
    }

    #[test]
    fn constant_selection_leaves_density_unchanged() {
        let spec = ModelSpec::new(
            OutcomeModel::new(Family::Logistic, CovariateLayout { x_cols: vec![0], z_cols: vec![0] }),
            WorkingModel::new(Family::Logistic, vec![0]),
            SelectionModel::logistic(vec![SelectionTerm::Intercept]),
        );
        let beta = [-1.0, 0.5, 0.3];
        for y in [0.0, 1.0] {
            let fc = conditional_density_fc(&spec, y, &[1.0], &[0.2], &beta, &[0.4]).unwrap();
            let f = spec.outcome.logpdf(y, &[1.0], &[0.2], &beta).unwrap().exp();
            assert!((fc - f).abs() < 1e-15);
            let sc = cond_score_beta(&spec, y, &[1.0], &[0.2], &beta, &[0.4]).unwrap();
            let s = spec.outcome.score(y, &[1.0], &[0.2], &beta).unwrap();
            for (a, b) in sc.iter().zip(&s) {
                assert!((a - b).abs() < 1e-15);
            }
            let sa = cond_score_alpha(&spec, y, &[1.0], &[0.2], &beta, &[0.4]).unwrap();
            assert!(sa[0].abs() < 1e-15);
        }
    }

    #[test]
    fn equal_tails_give_truncated_gaussian() {
        let spec = ModelSpec::new(
            OutcomeModel::new(Family::LinearGaussian, CovariateLayout { x_cols: vec![0], z_cols: vec![0] }),
            WorkingModel::new(Family::LinearGaussian, vec![0]),
            SelectionModel::stratified(vec![Interval::below(-0.63), Interval::above(2.63)], None).unwrap(),
        );
        let beta = [0.0, 1.0, 1.0, 4.0];
        let (x, z) = ([0.5], [-0.2]);
        let mu = 0.3;
        let mass = normal::interval_mass(f64::NEG_INFINITY, (-0.63 - mu) / 2.0)
            + normal::interval_mass((2.63 - mu) / 2.0, f64::INFINITY);
        for y in [-3.0, -0.7, 2.7, 5.0] {
            let fc = conditional_density_fc(&spec, y, &x, &z, &beta, &[0.4, 0.4]).unwrap();
            let trunc = normal::pdf((y - mu) / 2.0) / 2.0 / mass;
            assert!((fc - trunc).abs() < 1e-12);
        }
        assert_eq!(conditional_density_fc(&spec, 0.0, &x, &z, &beta, &[0.4, 0.4]).unwrap(), 0.0);
    }

    #[test]
    fn case_only_support_is_degenerate() {
        let spec = ModelSpec::new(
            OutcomeModel::new(Family::Logistic, CovariateLayout { x_cols: vec![], z_cols: vec![] }),
            WorkingModel::new(Family::Logistic, vec![]),
            SelectionModel::logistic_on(
                vec![SelectionTerm::Intercept],
                Support::new(vec![Interval::above(0.5)]).unwrap(),
            ),
        );
        // with a single support point the conditional density is identically 1
        let v = conditional_density_fc(&spec, 1.0, &[], &[], &[-2.0], &[0.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let s = cond_score_beta(&spec, 1.0, &[], &[], &[-2.0], &[0.0]).unwrap();
        assert!(s[0].abs() < 1e-15);
        let e = conditional_density_fc(&spec, 1.0, &[], &[], &[-800.0], &[0.0]);
        assert!(matches!(e, Err(Error::DegenerateConditioning { .. })));
    }
}
