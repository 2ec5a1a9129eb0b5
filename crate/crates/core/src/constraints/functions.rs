//! The phase-1 information functions `u`, `h*` and `v`.

use crate::error::{Error, Result};
use crate::model::{CondRule, ModelSpec, WorkingModel};
use crate::numerics::truncnorm::MIN_MASS;
use crate::numerics::{QuadratureSpec, Support, YRule};

/// `h*(x; θ)`: the expectation of `h` under the working law truncated to `D`.
pub fn h_star(
    working: &WorkingModel,
    x: &[f64],
    theta: &[f64],
    support: &Support,
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let law = working.law(x, theta)?;
    let rule = YRule::build(&law, support, quad)?;
    let d = working.design(x);
    let q = working.dim();
    let mass = rule.mass();
    if !(mass >= MIN_MASS) {
        return Err(Error::DegenerateConditioning { mass, x: x.to_vec() });
    }
    let mut out = vec![0.0; q];
    let mut tmp = vec![0.0; q];
    for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
        working.score_d_into(y, &d, theta, &mut tmp);
        for (o, t) in out.iter_mut().zip(&tmp) {
            *o += w * t;
        }
    }
    out.iter_mut().for_each(|o| *o /= mass);
    Ok(out)
}

/// `Σ_k w_k h(y_k)` over the outcome rule and the outcome mass on `D`.
pub(crate) fn weighted_h(spec: &ModelSpec, rule: &CondRule, x: &[f64], theta: &[f64]) -> (Vec<f64>, f64) {
    let d = spec.working.design(x);
    let q = spec.working.dim();
    let mut acc = vec![0.0; q];
    let mut tmp = vec![0.0; q];
    let mut fmass = 0.0;
    for k in 0..rule.len() {
        spec.working.score_d_into(rule.nodes[k], &d, theta, &mut tmp);
        let w = rule.weights[k];
        fmass += w;
        for (a, t) in acc.iter_mut().zip(&tmp) {
            *a += w * t;
        }
    }
    (acc, fmass)
}

/// `u = ∫ h/π f_c dy` from a prepared rule.
pub(crate) fn u_from_rule(spec: &ModelSpec, rule: &CondRule, x: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    if spec.has_proper_support() || rule.pi.iter().any(|&p| p <= 0.0) {
        return Err(Error::WrongVariant(
            "u requires positive selection probability everywhere; use the v constraint".into(),
        ));
    }
    let (acc, _) = weighted_h(spec, rule, x, theta);
    Ok(acc.into_iter().map(|a| a / rule.mass).collect())
}

/// `v = ∫_D (h − h*)/π f_cc dy` from a prepared rule.
pub(crate) fn v_from_rule(spec: &ModelSpec, rule: &CondRule, x: &[f64], theta: &[f64], hs: &[f64]) -> Vec<f64> {
    let (acc, fmass) = weighted_h(spec, rule, x, theta);
    acc.iter().zip(hs).map(|(a, h)| (a - h * fmass) / rule.mass).collect()
}

/// `u(x, z; β, α, θ)` for a positive-probability design.
pub fn u_constraint(
    spec: &ModelSpec,
    x: &[f64],
    z: &[f64],
    beta: &[f64],
    alpha: &[f64],
    theta: &[f64],
) -> Result<Vec<f64>> {
    let d = spec.outcome.design(x, z);
    let rule = CondRule::new(spec, &d, x, beta, alpha)?;
    u_from_rule(spec, &rule, x, theta)
}

/// `v(x, z; β, α, θ)` for a design with support `D`.
pub fn v_constraint(
    spec: &ModelSpec,
    x: &[f64],
    z: &[f64],
    beta: &[f64],
    alpha: &[f64],
    theta: &[f64],
) -> Result<Vec<f64>> {
    let d = spec.outcome.design(x, z);
    let rule = CondRule::new(spec, &d, x, beta, alpha)?;
    let hs = h_star(&spec.working, x, theta, spec.support(), &spec.working_quadrature())?;
    Ok(v_from_rule(spec, &rule, x, theta, &hs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CovariateLayout, Family, OutcomeModel, SelectionModel, SelectionTerm};
    use crate::numerics::{logit, truncated_normal_moments, Interval};

    fn binary_spec() -> ModelSpec {
        ModelSpec::new(
            OutcomeModel::new(Family::Logistic, CovariateLayout { x_cols: vec![0], z_cols: vec![0] }),
            WorkingModel::new(Family::Logistic, vec![0]),
            SelectionModel::logistic(vec![SelectionTerm::Intercept, SelectionTerm::Y]),
        )
    }

    #[test]
    fn u_binary_reference() {
        let spec = binary_spec();
        let u = u_constraint(&spec, &[0.0], &[0.0], &[-4.0, 1.0, 1.0], &[-3.5, 2.3], &[logit(0.1), 0.0]).unwrap();
        let oracle = 0.9 / 0.231475 * 0.126361 - 0.1 / 0.029312 * 0.873639;
        assert!((u[0] - oracle).abs() < 1e-4, "{} vs {oracle}", u[0]);
        assert!((u[0] + 2.4892).abs() < 1e-3);
        assert_eq!(u[1], 0.0);
    }

    #[test]
    fn h_star_two_tails_matches_truncated_moments() {
        let mut working = WorkingModel::new(Family::LinearGaussian, vec![0]);
        working.aux_variance = Some(1.0);
        let lo = Interval::below(-0.63);
        let hi = Interval::above(2.63);
        let d = Support::new(vec![lo, hi]).unwrap();
        let a = truncated_normal_moments(0.0, 1.0, lo, 1).unwrap();
        let b = truncated_normal_moments(0.0, 1.0, hi, 1).unwrap();
        let expected = (a.m1 + b.m1) / (a.mass + b.mass);
        for quad in [QuadratureSpec::closed_form(), QuadratureSpec::default()] {
            let hs = h_star(&working, &[1.7], &[0.0, 0.0], &d, &quad).unwrap();
            assert!((hs[0] - expected).abs() < 1e-10);
            assert!((hs[1] - 1.7 * expected).abs() < 1e-10);
        }
        let full = h_star(&working, &[1.7], &[0.3, 0.2], &Support::real_line(), &QuadratureSpec::default()).unwrap();
        assert!(full.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn h_star_cases_only() {
        let working = WorkingModel::new(Family::Logistic, vec![0]);
        let d = Support::new(vec![Interval::above(0.5)]).unwrap();
        let hs = h_star(&working, &[2.0], &[-1.0, 0.3], &d, &QuadratureSpec::two_point()).unwrap();
        let h1 = working.score(1.0, &[2.0], &[-1.0, 0.3]);
        assert!((hs[0] - h1[0]).abs() < 1e-15 && (hs[1] - h1[1]).abs() < 1e-15);
    }

    #[test]
    fn u_rejects_proper_support() {
        let spec = ModelSpec::new(
            OutcomeModel::new(Family::LinearGaussian, CovariateLayout { x_cols: vec![0], z_cols: vec![0] }),
            WorkingModel::new(Family::LinearGaussian, vec![0]),
            SelectionModel::stratified(vec![Interval::below(-0.63), Interval::above(2.63)], None).unwrap(),
        );
        let e = u_constraint(&spec, &[0.0], &[0.0], &[0.0, 1.0, 1.0, 4.0], &[0.3, 0.5], &[0.0, 1.0]);
        assert!(matches!(e, Err(Error::WrongVariant(_))));
    }

    #[test]
    fn v_equals_u_on_the_real_line() {
        let mut spec = binary_spec();
        spec.working.aux_variance = None;
        let args = ([1.0], [0.4], [-2.0, 0.7, 0.5], [-2.5, 1.8], [-0.5, 0.4]);
        let u = u_constraint(&spec, &args.0, &args.1, &args.2, &args.3, &args.4).unwrap();
        let v = v_constraint(&spec, &args.0, &args.1, &args.2, &args.3, &args.4).unwrap();
        assert_ne!(u, vec![0.0, 0.0]);
        for (a, b) in u.iter().zip(&v) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
