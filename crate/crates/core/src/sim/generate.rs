//! Phase-1 data generation and phase-2 Bernoulli sampling.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::scenario::{Design, ScenarioConfig};
use crate::error::Result;
use crate::model::{Dataset, ObservationRecord, SelectionModel};
use crate::numerics::rng::{Purpose, StreamKey};
use crate::numerics::{expit, Support};

fn categorize(v: f64, cuts: &[f64]) -> f64 {
    cuts.iter().filter(|&&c| v > c).count() as f64
}

/// `n` phase-1 rows `(y, x, z)` for one replication, with `z` kept for every
/// row and nobody selected yet.
pub fn generate_phase1(config: &ScenarioConfig, rep: u64) -> Result<Dataset> {
    generate_rows(config, config.n, StreamKey::new(config.master_seed, rep, Purpose::Phase1))
}

pub(crate) fn generate_rows(config: &ScenarioConfig, n: usize, key: StreamKey) -> Result<Dataset> {
    let mut rng = key.rng();
    let b = &config.beta0;
    let rho = config.rho;
    let c = (1.0 - rho * rho).sqrt();
    let support = Support::real_line();
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        let z = rho * u + c * e;
        let x = if config.design.has_categorized_x() { categorize(u, &config.x_cuts) } else { u };
        let y = match config.design {
            Design::LogisticExpensive => {
                let p = expit(b[0] + b[1] * x + b[2] * z);
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            Design::LogisticSurrogate => {
                let p = expit(b[0] + b[1] * z);
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            Design::LinearExpensive => {
                let eps: f64 = StandardNormal.sample(&mut rng);
                b[0] + b[1] * x + b[2] * z + b[3].sqrt() * eps
            }
            Design::LinearSurrogate => {
                let eps: f64 = StandardNormal.sample(&mut rng);
                b[0] + b[1] * z + b[2].sqrt() * eps
            }
        };
        records.push(ObservationRecord::new(y, vec![x], Some(vec![z]), false, &support)?);
    }
    Dataset::new(records, "y", vec!["x".into()], vec!["z".into()])
}

/// Independent Bernoulli(π(y, x; α)) selection. Sets `r` and `s`; with
/// `mask` the expensive covariates of unselected rows are removed.
pub fn phase2_sample(
    data: &Dataset,
    selection: &SelectionModel,
    alpha: &[f64],
    key: StreamKey,
    mask: bool,
) -> Result<Dataset> {
    let mut rng = key.rng();
    let support = selection.support();
    let mut out = data.clone();
    for rec in out.records.iter_mut() {
        let p = selection.prob(rec.y, &rec.x, alpha)?;
        let u: f64 = rng.random();
        rec.s = support.contains(rec.y);
        rec.r = rec.s && u < p;
        if mask && !rec.r {
            rec.z = None;
        }
    }
    Ok(out)
}

/// Phase-1 data plus design sampling for replication `rep`; `z` is masked.
pub fn simulate_dataset(config: &ScenarioConfig, rep: u64) -> Result<Dataset> {
    let spec = config.model_spec()?;
    let p1 = generate_phase1(config, rep)?;
    phase2_sample(&p1, &spec.selection, &config.alpha0, StreamKey::new(config.master_seed, rep, Purpose::Phase2), true)
}
