//! The biased-sampling density `f_c = f π / ∫ f π` for a Gaussian outcome
//! sampled only in its tails, the centred scores, and the two quadrature
//! routes (closed-form truncated moments and Gauss–Hermite/Legendre).
//!
//! `cargo run --release --example conditional_density`

use twophase_el::constraints::{h_star, v_constraint};
use twophase_el::model::{
    cond_score_beta, conditional_density_fc, CovariateLayout, Family, ModelSpec, OutcomeModel, SelectionModel,
    WorkingModel,
};
use twophase_el::numerics::{integrate_y, Interval, QuadratureSpec, Support, YLaw};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tails = vec![Interval::below(-0.63), Interval::above(2.63)];
    let layout = CovariateLayout { x_cols: vec![0], z_cols: vec![0] };
    let mut working = WorkingModel::new(Family::LinearGaussian, vec![0]);
    working.aux_variance = Some(5.0);
    let spec = ModelSpec::new(
        OutcomeModel::new(Family::LinearGaussian, layout),
        working,
        SelectionModel::stratified(tails.clone(), None)?,
    );
    let beta = [0.0, 1.0, 1.0, 4.0];
    let alpha = [0.3, 0.5];
    let (x, z) = ([1.0], [0.5]);

    println!("{:>6} {:>12} {:>12}", "y", "f_c", "f");
    for y in [-3.0, -1.0, -0.63, 0.0, 1.5, 2.64, 4.0, 6.0] {
        let fc = conditional_density_fc(&spec, y, &x, &z, &beta, &alpha)?;
        let f = spec.outcome.logpdf(y, &x, &z, &beta)?.exp();
        println!("{y:>6.2} {fc:>12.6} {f:>12.6}");
    }

    // f_c integrates to one over the support under either rule
    let d = spec.outcome.design(&x, &z);
    let law = spec.outcome.law(&d, &beta)?;
    let support = Support::new(tails)?;
    for (name, quad) in [("closed form", QuadratureSpec::closed_form()), ("Gauss-Legendre", QuadratureSpec::default())]
    {
        let total = integrate_y(
            |y| {
                conditional_density_fc(&spec, y, &x, &z, &beta, &alpha).unwrap()
                    / spec.outcome.logpdf(y, &x, &z, &beta).unwrap().exp()
            },
            &law,
            &support,
            &quad,
        )?;
        println!("{name:>15}: integral of f_c = {total:.12}");
    }
    if let YLaw::Gaussian { mean, sd } = law {
        println!("outcome law at (x, z): N({mean}, {sd}^2)");
    }

    let s = cond_score_beta(&spec, 3.0, &x, &z, &beta, &alpha)?;
    println!("s_cb at y = 3: {s:.5?}");
    let theta = [0.2, 0.9];
    let hs = h_star(&spec.working, &x, &theta, spec.support(), &spec.working_quadrature())?;
    let v = v_constraint(&spec, &x, &z, &beta, &alpha, &theta)?;
    println!("h* = {hs:.5?}, v = {v:.5?}");
    Ok(())
}
