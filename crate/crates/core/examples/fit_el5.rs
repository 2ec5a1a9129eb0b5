//! One dataset from the binary-outcome design with an expensive covariate:
//! compare the conditional likelihood, inverse-probability weighting and the
//! joint empirical-likelihood estimators on the same phase-2 sample.
//!
//! `cargo run --release --example fit_el5 [n] [seed]`

use twophase_el::estimators::{run_estimator, EstimatorKind, FitOptions};
use twophase_el::inference::wald_summary;
use twophase_el::sim::{simulate_dataset, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut sc = ScenarioConfig::preset("table1")?;
    if let Some(n) = args.next() {
        sc.n = n.parse()?;
    }
    if let Some(seed) = args.next() {
        sc.master_seed = seed.parse()?;
    }
    let data = simulate_dataset(&sc, 0)?;
    let spec = sc.model_spec()?;
    let ctx = sc.estimator_context(None)?;
    let cases = data.records.iter().filter(|r| r.r && r.y == 1.0).count();
    println!("phase 1: {} subjects, phase 2: {} ({} cases)", data.n(), data.m(), cases);
    println!("truth: {:?}\n", sc.beta0);

    println!("{:<10} {:>22} {:>22} {:>22}", "estimator", "(Intercept)", "x", "z");
    for name in ["CML-pihat", "CML-ps", "SW", "EL3", "EL5", "EL5-ps"] {
        let kind: EstimatorKind = name.parse()?;
        match run_estimator(kind, &data, &spec, &ctx, &FitOptions::default()) {
            Ok(fit) => {
                let cells: Vec<String> =
                    wald_summary(&fit, 0.05).iter().map(|w| format!("{:>9.4} ({:.4})", w.estimate, w.se)).collect();
                println!("{:<10} {:>22} {:>22} {:>22}", name, cells[0], cells[1], cells[2]);
            }
            Err(e) => println!("{name:<10} failed: {e}"),
        }
    }
    Ok(())
}
