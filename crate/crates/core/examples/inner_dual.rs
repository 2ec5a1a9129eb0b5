//! The inner empirical-likelihood problem on its own: given constraint rows
//! `g_i`, find `p_i = 1 / (N (1 − λᵀg_i))` with `Σ p_i g_i = 0`.
//!
//! `cargo run --release --example inner_dual`

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use twophase_el::estimators::{el_inner_lambda, InnerOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let n = 200;
    // two constraints whose sample means are off zero
    let g = DMatrix::from_fn(n, 2, |_, j| rng.random_range(-1.0..1.0) + if j == 0 { 0.2 } else { -0.1 });
    let sol = el_inner_lambda(&g, &InnerOptions::default())?;
    let weighted = g.transpose() * nalgebra::DVector::from_column_slice(&sol.p);
    println!("lambda = {:.6?}", sol.lambda.as_slice());
    println!("{} Newton iterations, residual {:.2e}", sol.iterations, sol.residual);
    println!(
        "sum p = {:.15}, min p = {:.3e}, max p = {:.3e}",
        sol.p.iter().sum::<f64>(),
        sol.p.iter().cloned().fold(f64::INFINITY, f64::min),
        sol.p.iter().cloned().fold(0.0, f64::max)
    );
    println!("max |sum p g| = {:.2e}", weighted.amax());
    println!("log EL ratio = {:.6}", sol.log_el_ratio);

    // zero outside the convex hull of the rows: no solution exists
    let shifted = g.map(|v| v + 5.0);
    match el_inner_lambda(&shifted, &InnerOptions::default()) {
        Ok(_) => println!("unexpected solution"),
        Err(e) => println!("shifted rows: {e}"),
    }
    Ok(())
}
