use std::path::{Path, PathBuf};

use super::config::{CommandConfig, FitConfig, RunConfig, SimulateConfig, SubsampleConfig};
use super::report::{
    results_csv, simreport_csv, write_atomic, ErrorInfo, FitReport, MethodResult, MethodStatus, SimReportFile,
};
use super::subsample::{stratified_subsample, SubsampleSummary};
use super::table::{load_csv, write_dataset};
use super::transform::apply_transforms;
use crate::error::{Error, Result};
use crate::estimators::run_estimator;
use crate::inference::{wald_row, wald_summary};
use crate::sim::{run_replications, SimReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_ALL_FAILED: i32 = 4;

/// Process exit status for an error that stopped a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Data { .. } | Error::Input(_) | Error::Io(_) => EXIT_DATA,
        _ => EXIT_ALL_FAILED,
    }
}

/// Files written by a command and its exit status.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub message: String,
    pub exit_code: i32,
}

fn out_dir(run: &RunConfig) -> PathBuf {
    run.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Load, transform and fit every requested estimator. Individual failures
/// are recorded per method.
pub fn fit_report(run: &RunConfig, fit: &FitConfig) -> Result<FitReport> {
    fit.validate()?;
    let raw = load_csv(&fit.data, &fit.schema)?;
    let (data, record) = apply_transforms(&raw, &fit.schema)?;
    let (spec, ctx) = fit.model(&data, record.strata_cuts)?;
    let methods: Vec<MethodResult> = in_pool(run.threads, || {
        use rayon::prelude::*;
        fit.estimators
            .par_iter()
            .map(|&kind| match run_estimator(kind, &data, &spec, &ctx, &fit.fit_options) {
                Ok(f) => {
                    let unstandardized = (!record.is_identity()).then(|| {
                        record
                            .unstandardized(&f, &spec.outcome, &data)
                            .iter()
                            .map(|c| wald_row(&c.name, c.estimate, c.se, fit.level))
                            .collect()
                    });
                    MethodResult {
                        estimator: kind.to_string(),
                        status: MethodStatus::Ok,
                        error: None,
                        coefficients: wald_summary(&f, fit.level),
                        unstandardized,
                        fit: Some(f),
                    }
                }
                Err(e) => MethodResult {
                    estimator: kind.to_string(),
                    status: MethodStatus::Failed,
                    error: Some(ErrorInfo::from(&e)),
                    coefficients: Vec::new(),
                    unstandardized: None,
                    fit: None,
                },
            })
            .collect()
    })?;
    Ok(FitReport { config: run.resolved(), seed: run.seed(), n: data.n(), m: data.m(), transforms: record, methods })
}

pub fn fit_command(run: &RunConfig) -> Result<CommandOutput> {
    let CommandConfig::Fit(fit) = &run.command else {
        return Err(Error::Config(format!("expected a fit config, found {}", run.command.mode())));
    };
    let report = fit_report(run, fit)?;
    let dir = out_dir(run);
    let json = dir.join("results.json");
    let csv = dir.join("results.csv");
    write_atomic(&json, &to_json(&report)?)?;
    write_atomic(&csv, results_csv(&report)?.as_bytes())?;
    let ok = report.methods.iter().filter(|m| m.status == MethodStatus::Ok).count();
    let mut message =
        format!("fitted {ok} of {} estimators (n = {}, m = {})", report.methods.len(), report.n, report.m);
    for m in report.methods.iter().filter(|m| m.status == MethodStatus::Failed) {
        if let Some(e) = &m.error {
            message.push_str(&format!("\n  {} failed: {}", m.estimator, e.message));
        }
    }
    let exit_code = if report.all_failed() { EXIT_ALL_FAILED } else { EXIT_OK };
    Ok(CommandOutput { files: vec![json, csv], message, exit_code })
}

/// Run the simulation study described by `sim`.
pub fn simulate_report(run: &RunConfig, sim: &SimulateConfig) -> Result<SimReport> {
    let scenario = sim.resolve(run.seed)?;
    in_pool(run.threads, || run_replications(&scenario))?
}

pub fn simulate_command(run: &RunConfig) -> Result<CommandOutput> {
    let CommandConfig::Simulate(sim) = &run.command else {
        return Err(Error::Config(format!("expected a simulate config, found {}", run.command.mode())));
    };
    let report = simulate_report(run, sim)?;
    let seed = report.config.master_seed;
    let file = SimReportFile { run: RunConfig { seed: Some(seed), ..run.clone() }, seed, report };
    let dir = out_dir(run);
    let json = dir.join("simreport.json");
    let csv = dir.join("simreport.csv");
    write_atomic(&json, &to_json(&file)?)?;
    write_atomic(&csv, simreport_csv(&file)?.as_bytes())?;
    let r = &file.report;
    let message = format!(
        "{} replications of {} estimators in {:.1}s{}",
        r.config.replications,
        r.estimators.len(),
        r.runtime_secs,
        if r.unreliable { "; some estimators failed in more than 20% of replications" } else { "" }
    );
    let exit_code = if r.estimators.iter().all(|e| e.successes == 0) { EXIT_ALL_FAILED } else { EXIT_OK };
    Ok(CommandOutput { files: vec![json, csv], message, exit_code })
}

pub fn subsample_report(run: &RunConfig, sub: &SubsampleConfig) -> Result<(crate::model::Dataset, SubsampleSummary)> {
    let mut schema = sub.schema.clone();
    schema.r_column = None;
    schema.strata = None;
    let data = load_csv(&sub.data, &schema)?;
    stratified_subsample(&data, sub.quantiles, sub.alpha, run.seed())
}

pub fn subsample_command(run: &RunConfig) -> Result<CommandOutput> {
    let CommandConfig::Subsample(sub) = &run.command else {
        return Err(Error::Config(format!("expected a subsample config, found {}", run.command.mode())));
    };
    if Path::new(&sub.output).file_name().is_none() {
        return Err(Error::Config(format!("invalid output file name {:?}", sub.output)));
    }
    let (data, summary) = subsample_report(run, sub)?;
    let dir = out_dir(run);
    let csv = dir.join(&sub.output);
    let run = &run.resolved();
    let mut bytes = super::report::provenance_header(run, summary.seed)?.into_bytes();
    write_dataset(&data, sub.schema.r_column.as_deref().unwrap_or("r"), &mut bytes)?;
    write_atomic(&csv, &bytes)?;
    let json = dir.join("subsample.json");
    #[derive(serde::Serialize)]
    struct Out<'a> {
        config: &'a RunConfig,
        summary: &'a SubsampleSummary,
    }
    write_atomic(&json, &to_json(&Out { config: run, summary: &summary })?)?;
    let message = format!(
        "selected {} of {} rows (cuts {:.6}, {:.6})",
        summary.phase2_size,
        data.n(),
        summary.cuts[0],
        summary.cuts[1]
    );
    Ok(CommandOutput { files: vec![csv, json], message, exit_code: EXIT_OK })
}

/// Check a configuration (and its data) without fitting anything.
pub fn validate_command(run: &RunConfig) -> Result<CommandOutput> {
    let message = match &run.command {
        CommandConfig::Fit(fit) => {
            fit.validate()?;
            let raw = load_csv(&fit.data, &fit.schema)?;
            let (data, record) = apply_transforms(&raw, &fit.schema)?;
            let (spec, _) = fit.model(&data, record.strata_cuts)?;
            format!(
                "fit config is valid: n = {}, m = {}, {} outcome parameters, {} selection parameters, {} estimators",
                data.n(),
                data.m(),
                spec.outcome.dim(),
                spec.selection.dim(),
                fit.estimators.len()
            )
        }
        CommandConfig::Simulate(sim) => {
            let sc = sim.resolve(run.seed)?;
            format!("simulate config is valid: {:?} design, n = {}, {} replications", sc.design, sc.n, sc.replications)
        }
        CommandConfig::Subsample(sub) => {
            let (data, summary) = subsample_report(run, sub)?;
            format!(
                "subsample config is valid: {} rows, expected phase-2 size {:.0}",
                data.n(),
                expected_size(&summary)
            )
        }
    };
    Ok(CommandOutput { files: Vec::new(), message, exit_code: EXIT_OK })
}

fn expected_size(s: &SubsampleSummary) -> f64 {
    s.stratum_sizes[0] as f64 * s.alpha[0] + s.stratum_sizes[2] as f64 * s.alpha[1]
}

/// Dispatch on the config's mode.
pub fn run_command(run: &RunConfig) -> Result<CommandOutput> {
    match run.command {
        CommandConfig::Fit(_) => fit_command(run),
        CommandConfig::Simulate(_) => simulate_command(run),
        CommandConfig::Subsample(_) => subsample_command(run),
    }
}
