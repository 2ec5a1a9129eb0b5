//! Health-survey style analysis end to end: synthetic complete cohort,
//! stratified phase-2 subsample, log/standardize transforms and a fit of
//! several estimators, written as `results.json` / `results.csv`.
//!
//! Run with `cargo run --release --example survey_analysis [out_dir]`.

use std::path::PathBuf;

use twophase_el::io::{
    fit_command, subsample_command, write_atomic, write_dataset, CommandConfig, FitReport, MethodStatus, RunConfig,
};
use twophase_el::sim::{survey_dataset, SURVEY_N};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "survey_out".into());
    std::fs::create_dir_all(&out)?;

    let cohort = survey_dataset(SURVEY_N, 2015)?;
    let mut bytes = Vec::new();
    write_dataset(&cohort, "complete", &mut bytes)?;
    let full = out.join("cohort.csv");
    write_atomic(&full, &bytes)?;

    let sub: RunConfig = serde_json::from_value(serde_json::json!({
        "mode": "subsample",
        "seed": 16,
        "out_dir": out,
        "data": full,
        "schema": {
            "y_column": "sbp",
            "x_columns": ["bmi", "age"],
            "z_columns": ["sodium", "satfat", "saltprep"],
            "r_column": "r"
        },
        "quantiles": [0.25, 0.75],
        "alpha": [0.4, 0.4]
    }))?;
    let done = subsample_command(&sub)?;
    println!("{}", done.message);

    let fit: RunConfig = serde_json::from_value(serde_json::json!({
        "mode": "fit",
        "out_dir": out,
        "data": out.join("phase2.csv"),
        "schema": {
            "y_column": "sbp",
            "x_columns": ["bmi", "age"],
            "z_columns": ["sodium", "satfat", "saltprep"],
            "r_column": "r",
            "transforms": {
                "sbp": ["log", "standardize"],
                "bmi": ["log", "standardize"],
                "age": ["standardize_unit_variance"],
                "sodium": ["standardize_unit_variance"],
                "satfat": ["standardize_unit_variance"],
                "saltprep": ["standardize_unit_variance"]
            },
            "strata": {"quantiles": [0.25, 0.75]}
        },
        "family": "linear_gaussian",
        "selection": {"form": "stratified"},
        "post_stratification": {"form": "stratified", "x_cells": {"column": "bmi", "quantiles": [0.25, 0.5, 0.75]}},
        "estimators": ["CML-pihat", "CML-ps", "SW", "SW-ps", "EL5", "EL5-ps"]
    }))?;
    let done = fit_command(&fit)?;
    println!("{}", done.message);

    let report: FitReport = serde_json::from_slice(&std::fs::read(out.join("results.json"))?)?;
    if let CommandConfig::Fit(_) = &report.config.command {
        println!("phase 1: {} subjects, phase 2: {}", report.n, report.m);
    }
    for m in report.methods.iter().filter(|m| m.status == MethodStatus::Ok) {
        println!("{}", m.estimator);
        for c in &m.coefficients {
            println!("  {:12} {:>10.5} {:>10.5} {:>10.3e}", c.name, c.estimate, c.se, c.p_value);
        }
    }
    println!("tables written to {}", out.display());
    Ok(())
}
