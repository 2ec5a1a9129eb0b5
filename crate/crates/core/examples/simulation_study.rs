//! A small Monte Carlo study from one of the named presets, printed in the
//! layout of the simulation tables: bias, (empirical SE), {average estimated
//! SE} and <coverage>.
//!
//! `cargo run --release --example simulation_study [preset] [replications]`

use twophase_el::sim::{run_replications, ScenarioConfig, PRESETS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "table3".into());
    let mut sc = ScenarioConfig::preset(&preset).map_err(|e| format!("{e} (presets: {})", PRESETS.join(", ")))?;
    sc.replications = args.next().map(|r| r.parse()).transpose()?.unwrap_or(40);
    let report = run_replications(&sc)?;
    println!("{preset}: n = {}, {} replications, {:.1}s", sc.n, sc.replications, report.runtime_secs);
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    for e in &report.estimators {
        println!(
            "\n{} ({} ok, {} failed{})",
            e.estimator,
            e.successes,
            e.failures,
            if e.unreliable { ", unreliable" } else { "" }
        );
        for p in &e.params {
            println!("  {:<12} {:>8.4} ({}) {{{}}} <{}>", p.name, p.bias, fmt(p.ese), fmt(p.ase), fmt(p.coverage));
        }
    }
    Ok(())
}
