//! Closed-form asymptotic variances from population moment blocks, next to
//! the standard errors the fitted estimators report on one large dataset.
//! The reported errors are sandwich estimates from the phase-2 sample and
//! approach the closed forms as `n` grows.
//!
//! `cargo run --release --example variance [n]`

use twophase_el::estimators::{run_estimator, EstimatorKind, FitOptions};
use twophase_el::inference::{closed_form_avar, estimate_moment_blocks, AvarKind};
use twophase_el::numerics::{Purpose, StreamKey};
use twophase_el::sim::{generate_phase1, phase2_sample, theta_star, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sc = ScenarioConfig::preset("table1")?;
    sc.n = std::env::args().nth(1).map_or(Ok(100_000), |a| a.parse())?;
    sc.master_seed = 21;
    sc.theta_star_draws = 200_000;
    let spec = sc.model_spec()?;
    let theta = theta_star(&sc)?;
    let p1 = generate_phase1(&sc, 0)?;
    let key = StreamKey::new(sc.master_seed, 0, Purpose::Phase2);
    let full = phase2_sample(&p1, &spec.selection, &sc.alpha0, key, false)?;
    let observed = phase2_sample(&p1, &spec.selection, &sc.alpha0, key, true)?;

    let blocks = estimate_moment_blocks(&full, &spec, &sc.beta0, &sc.alpha0, &theta)?;
    println!("theta* = {theta:.4?}; J - C max {:.2e}", (&blocks.j - &blocks.c).amax());
    let n = sc.n as f64;
    let ctx = sc.estimator_context(Some(theta))?;
    for (kind, name) in [
        (AvarKind::Cml, "CML-pi"),
        (AvarKind::PiThetaStar, "EL-pi-thetastar-1"),
        (AvarKind::PiThetaHat, "EL-pi-thetahat-1"),
    ] {
        let avar = closed_form_avar(kind, &blocks)?;
        let se: Vec<f64> = (0..avar.nrows()).map(|i| (avar[(i, i)] / n).sqrt()).collect();
        let fit = run_estimator(name.parse::<EstimatorKind>()?, &observed, &spec, &ctx, &FitOptions::default())?;
        println!("{name:<18} closed form {se:.4?}  reported {:.4?}", fit.beta_se);
    }
    Ok(())
}
