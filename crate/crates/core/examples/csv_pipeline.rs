//! From a two-phase CSV to fitted coefficients on both scales: schema,
//! located input errors, transforms with their recorded inverse, and a
//! write/read round trip.
//!
//! `cargo run --release --example csv_pipeline`

use twophase_el::estimators::{run_estimator, EstimatorContext, EstimatorKind, FitOptions};
use twophase_el::io::{apply_transforms, read_dataset, write_dataset, DatasetSchema, Strata, Transform};
use twophase_el::model::{CovariateLayout, Family, ModelSpec, OutcomeModel, SelectionModel, WorkingModel};
use twophase_el::sim::{simulate_dataset, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a located error: the second data row is selected but has no z
    let bad = "y,x,z,r\n1.5,0,0.3,1\n-2.0,1,,1\n";
    let schema = DatasetSchema { r_column: Some("r".into()), ..DatasetSchema::new("y", &["x"], &["z"]) };
    if let Err(e) = read_dataset(bad.as_bytes(), &schema) {
        println!("rejected: {e}");
    }

    // a linear-outcome two-phase sample written as CSV, then read back
    let mut sc = ScenarioConfig::preset("table3")?;
    sc.master_seed = 31;
    let data = simulate_dataset(&sc, 0)?;
    let mut csv = Vec::new();
    write_dataset(&data, "r", &mut csv)?;
    println!("\n{}", String::from_utf8_lossy(&csv).lines().take(4).collect::<Vec<_>>().join("\n"));
    let back = read_dataset(csv.as_slice(), &schema)?;
    let same =
        back.records.iter().zip(&data.records).all(|(a, b)| a.y == b.y && a.x == b.x && a.z == b.z && a.r == b.r);
    println!("... {} rows, {} selected; round trip exact: {same}", back.n(), back.m());

    // unit-variance covariates; the outcome strata follow the transformed y
    let mut schema = schema;
    schema.transforms.insert("x".into(), vec![Transform::StandardizeUnitVariance]);
    schema.transforms.insert("z".into(), vec![Transform::StandardizeUnitVariance]);
    schema.strata = Some(Strata::Cuts([-0.63, 2.63]));
    let raw = read_dataset(csv.as_slice(), &schema)?;
    let (scaled, record) = apply_transforms(&raw, &schema)?;
    let restored = record.invert(&scaled);
    let err = restored.records.iter().zip(&raw.records).map(|(a, b)| (a.x[0] - b.x[0]).abs()).fold(0.0, f64::max);
    println!("\nx scale steps: {:?}; inverse error {err:.1e}", record.column("x").map(|c| &c.steps));

    let spec = ModelSpec::new(
        OutcomeModel::new(Family::LinearGaussian, CovariateLayout { x_cols: vec![0], z_cols: vec![0] }),
        WorkingModel::new(Family::LinearGaussian, vec![0]),
        SelectionModel::stratified(DatasetSchema::support_from_cuts(record.strata_cuts)?.intervals().to_vec(), None)?,
    );
    let fit = run_estimator(
        "EL5".parse::<EstimatorKind>()?,
        &scaled,
        &spec,
        &EstimatorContext::default(),
        &FitOptions::default(),
    )?;
    println!("\n{:<12} {:>10} {:>10} {:>14} {:>10}", "coefficient", "scaled", "se", "original units", "se");
    for (c, u) in fit.reported().iter().zip(record.unstandardized(&fit, &spec.outcome, &scaled)) {
        println!("{:<12} {:>10.4} {:>10.4} {:>14.4} {:>10.4}", c.name, c.estimate, c.se, u.estimate, u.se);
    }
    Ok(())
}
