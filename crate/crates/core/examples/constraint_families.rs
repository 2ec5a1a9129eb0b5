//! The joint constraint families side by side: their dimensions, which
//! blocks they stack, and the numerical rank of the stacked rows. Family 4
//! carries `R s_cα` next to `s_α`; the selection score makes them collinear,
//! so it only fits with `reduce_dependent`.
//!
//! `cargo run --release --example constraint_families`

use twophase_el::constraints::{assemble_constraints, rank_check, ConstraintConfig, ParamMode, Variant};
use twophase_el::estimators::{
    fit_el, fit_selection_mle, fit_working, AlphaSource, ElEstimator, FitOptions, ThetaSource,
};
use twophase_el::sim::{simulate_dataset, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sc = ScenarioConfig::preset("table1")?;
    sc.n = 4000;
    sc.master_seed = 11;
    let data = simulate_dataset(&sc, 0)?;
    let spec = sc.model_spec()?;
    let alpha = fit_selection_mle(&data, &spec.selection)?;
    let theta = fit_working(&data, &spec.working)?.theta;
    let mut eta = sc.beta0.clone();
    eta.extend(&alpha);
    eta.extend(&theta);

    for variant in [Variant::Joint3, Variant::Joint4, Variant::Joint5] {
        let config = ConstraintConfig::new(variant, &spec, ParamMode::Free, ParamMode::Free);
        let cs = assemble_constraints(&config, &data, &eta, &spec)?;
        let report = rank_check(&cs);
        let blocks: Vec<String> = cs.blocks.iter().map(|(b, r)| format!("{b:?}[{}]", r.len())).collect();
        println!("EL{}: {} rows x {} constraints ({})", variant.number(), cs.rows.nrows(), cs.dim(), blocks.join(" "));
        println!(
            "     rank {} of {}, smallest singular value {:.3e}",
            report.rank,
            report.dim,
            report.singular_values.last().unwrap_or(&0.0)
        );
        if report.is_deficient() {
            println!("     dependent coordinates: {:?}", report.near_dependent);
        }
    }

    let est = ElEstimator { variant: Variant::Joint4, alpha: AlphaSource::Mle, theta: ThetaSource::Estimated };
    match fit_el(&data, &spec, &est, &FitOptions::default()) {
        Ok(_) => println!("\nEL4 fitted without reduction"),
        Err(e) => println!("\nEL4 with the default options: {e}"),
    }
    let reduced = FitOptions { reduce_dependent: true, ..FitOptions::default() };
    let fit = fit_el(&data, &spec, &est, &reduced)?;
    println!("EL4 with reduce_dependent: beta = {:.4?}, se = {:.4?}", fit.beta, fit.beta_se);
    for w in &fit.diagnostics.warnings {
        println!("  warning: {w}");
    }
    let fit5 = fit_el(&data, &spec, &ElEstimator::recommended(), &FitOptions::default())?;
    println!("EL5:                       beta = {:.4?}, se = {:.4?}", fit5.beta, fit5.beta_se);
    Ok(())
}
