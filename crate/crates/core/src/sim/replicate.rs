//! Replication engine and Monte Carlo summaries.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate_rows, simulate_dataset};
use super::scenario::ScenarioConfig;
use crate::error::{Error, Result};
use crate::estimators::{fit_working, run_estimator, EstimatorKind};
use crate::numerics::rng::{Purpose, StreamKey};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Share of failed replications above which an estimator's summary is flagged.
pub const UNRELIABLE_FAILURE_RATE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub truth: f64,
    pub bias: f64,
    /// Empirical standard error; absent with fewer than two successes.
    pub ese: Option<f64>,
    /// Average estimated standard error.
    pub ase: Option<f64>,
    /// Share of 95% Wald intervals covering the truth.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: String,
    pub successes: usize,
    pub failures: usize,
    pub failure_kinds: BTreeMap<String, usize>,
    pub unreliable: bool,
    pub params: Vec<ParamSummary>,
}

impl EstimatorSummary {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: ScenarioConfig,
    /// `θ*` used by the fixed-θ estimators, if any ran.
    pub theta_star: Option<Vec<f64>>,
    pub estimators: Vec<EstimatorSummary>,
    pub unreliable: bool,
    /// Wall-clock seconds; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl SimReport {
    pub fn estimator(&self, name: &str) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.estimator == name)
    }
}

/// Limit of the working-model fit under the design, from one large phase-1 draw.
pub fn theta_star(config: &ScenarioConfig) -> Result<Vec<f64>> {
    let big = generate_rows(config, config.theta_star_draws, StreamKey::new(config.master_seed, 0, Purpose::Other(1)))?;
    let spec = config.model_spec()?;
    Ok(fit_working(&big, &spec.working)?.theta)
}

/// Per-replication estimates and standard errors in reporting order.
type RepOutcome = Vec<std::result::Result<(Vec<String>, Vec<f64>, Vec<f64>), Error>>;

fn one_replication(config: &ScenarioConfig, rep: u64, ctx: &crate::estimators::EstimatorContext) -> RepOutcome {
    let spec = match config.model_spec() {
        Ok(s) => s,
        Err(e) => return vec![Err(e); config.estimators.len()],
    };
    let data = match simulate_dataset(config, rep) {
        Ok(d) => d,
        Err(e) => return vec![Err(e); config.estimators.len()],
    };
    config
        .estimators
        .iter()
        .map(|&kind| {
            let fit = run_estimator(kind, &data, &spec, ctx, &config.fit_options)?;
            let rep = fit.reported();
            let se = rep.iter().map(|c| c.se).collect::<Vec<_>>();
            if se.iter().any(|s| !s.is_finite()) {
                return Err(Error::Numeric { what: "non-finite standard error".into(), location: fit.estimator });
            }
            Ok((rep.iter().map(|c| c.name.clone()).collect(), rep.iter().map(|c| c.estimate).collect(), se))
        })
        .collect()
}

/// Run every replication in parallel and summarize each estimator.
pub fn run_replications(config: &ScenarioConfig) -> Result<SimReport> {
    config.validate()?;
    let start = Instant::now();
    let needs_theta = config.estimators.iter().any(EstimatorKind::needs_theta_star);
    let theta = match (&config.theta_star, needs_theta) {
        (Some(t), _) => Some(t.clone()),
        (None, true) => Some(theta_star(config)?),
        (None, false) => None,
    };
    let ctx = config.estimator_context(theta.clone())?;
    let outcomes: Vec<RepOutcome> =
        (0..config.replications as u64).into_par_iter().map(|rep| one_replication(config, rep, &ctx)).collect();

    let truth = config.reported_truth();
    let mut summaries = Vec::new();
    for (e, kind) in config.estimators.iter().enumerate() {
        let mut names: Option<Vec<String>> = None;
        let mut ests: Vec<Vec<f64>> = Vec::new();
        let mut ses: Vec<Vec<f64>> = Vec::new();
        let mut kinds = BTreeMap::new();
        for rep in &outcomes {
            match &rep[e] {
                Ok((nm, est, se)) => {
                    names.get_or_insert_with(|| nm.clone());
                    ests.push(est.clone());
                    ses.push(se.clone());
                }
                Err(err) => *kinds.entry(err.kind().to_string()).or_insert(0) += 1,
            }
        }
        let failures = config.replications - ests.len();
        let params = match names {
            Some(names) => names
                .iter()
                .enumerate()
                .map(|(j, name)| summarize(name, truth[j], ests.iter().map(|v| v[j]), ses.iter().map(|v| v[j])))
                .collect(),
            None => Vec::new(),
        };
        summaries.push(EstimatorSummary {
            estimator: kind.to_string(),
            successes: ests.len(),
            failures,
            failure_kinds: kinds,
            unreliable: failures as f64 > UNRELIABLE_FAILURE_RATE * config.replications as f64,
            params,
        });
    }
    let unreliable = summaries.iter().any(|s| s.unreliable);
    Ok(SimReport {
        config: config.clone(),
        theta_star: theta,
        estimators: summaries,
        unreliable,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

fn summarize(name: &str, truth: f64, est: impl Iterator<Item = f64>, se: impl Iterator<Item = f64>) -> ParamSummary {
    let est: Vec<f64> = est.collect();
    let se: Vec<f64> = se.collect();
    let k = est.len() as f64;
    let mean = est.iter().sum::<f64>() / k;
    let ese = (est.len() >= 2).then(|| (est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt());
    let nonempty = !est.is_empty();
    let ase = nonempty.then(|| se.iter().sum::<f64>() / k);
    let coverage =
        nonempty.then(|| est.iter().zip(&se).filter(|(e, s)| (*e - truth).abs() <= Z95 * **s).count() as f64 / k);
    ParamSummary {
        name: name.to_string(),
        truth,
        bias: if nonempty { mean - truth } else { f64::NAN },
        ese,
        ase,
        coverage,
    }
}
