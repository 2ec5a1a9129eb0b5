//! Phase-1 working-model and selection-model fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Family, SelectionForm, SelectionModel, WorkingModel};
use crate::numerics::{expit, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingFit {
    pub theta: Vec<f64>,
    /// Residual mean square `RSS / (n − p)` for the linear family.
    pub aux_variance: Option<f64>,
    pub iterations: usize,
}

impl WorkingFit {
    /// The working model with `aux_variance` filled in.
    pub fn apply(&self, working: &WorkingModel) -> WorkingModel {
        let mut w = working.clone();
        if self.aux_variance.is_some() {
            w.aux_variance = self.aux_variance;
        }
        w
    }
}

fn logistic_loglik(design: &[Vec<f64>], resp: &[f64], beta: &DVector<f64>) -> f64 {
    design
        .iter()
        .zip(resp)
        .map(|(d, &y)| {
            let eta: f64 = d.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            y * eta - softplus(eta)
        })
        .sum()
}

/// Damped Newton–Raphson for a logistic regression of `resp` on `design` rows.
pub(crate) fn logistic_newton(design: &[Vec<f64>], resp: &[f64], what: &str) -> Result<(Vec<f64>, usize)> {
    let p = design.first().map_or(0, |d| d.len());
    let n = design.len();
    if n < p || p == 0 {
        return Err(Error::Estimation(format!("{what}: {n} rows for {p} coefficients")));
    }
    let mut beta = DVector::zeros(p);
    let ybar = resp.iter().sum::<f64>() / n as f64;
    if ybar <= 0.0 || ybar >= 1.0 {
        return Err(Error::Estimation(format!("{what}: response is constant")));
    }
    beta[0] = (ybar / (1.0 - ybar)).ln();
    let mut ll = logistic_loglik(design, resp, &beta);
    for iter in 0..200 {
        let mut grad = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for (d, &y) in design.iter().zip(resp) {
            let eta: f64 = d.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let mu = expit(eta);
            let w = mu * (1.0 - mu);
            for a in 0..p {
                grad[a] += (y - mu) * d[a];
                for b in 0..=a {
                    info[(a, b)] += w * d[a] * d[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        if grad.amax() < 1e-10 * (n as f64).max(1.0) {
            return Ok((beta.iter().copied().collect(), iter));
        }
        let step = info
            .clone()
            .cholesky()
            .map(|c| c.solve(&grad))
            .ok_or_else(|| Error::Estimation(format!("{what}: singular information (collinear design)")))?;
        let mut t = 1.0;
        loop {
            let cand = &beta + &step * t;
            let lc = logistic_loglik(design, resp, &cand);
            if lc >= ll - 1e-12 * ll.abs() {
                beta = cand;
                ll = lc;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Ok((beta.iter().copied().collect(), iter));
            }
        }
        if beta.amax() > 50.0 {
            return Err(Error::Estimation(format!("{what}: coefficients diverge (separation)")));
        }
        if (&step * t).amax() < 1e-13 {
            return Ok((beta.iter().copied().collect(), iter + 1));
        }
    }
    Err(Error::NonConvergence { iterations: 200, detail: format!("{what}: Newton did not converge") })
}

/// Fit the working model to all phase-1 rows.
pub fn fit_working(data: &Dataset, working: &WorkingModel) -> Result<WorkingFit> {
    let p = working.dim();
    let n = data.n();
    if n <= p {
        return Err(Error::Estimation(format!("working model: {n} rows for {p} coefficients")));
    }
    let design: Vec<Vec<f64>> = data.records.iter().map(|r| working.design(&r.x)).collect();
    let y: Vec<f64> = data.records.iter().map(|r| r.y).collect();
    match working.family {
        Family::Logistic => {
            let (theta, iterations) = logistic_newton(&design, &y, "working model")?;
            Ok(WorkingFit { theta, aux_variance: None, iterations })
        }
        Family::LinearGaussian => {
            let x = DMatrix::from_fn(n, p, |i, j| design[i][j]);
            let yv = DVector::from_column_slice(&y);
            let xtx = x.transpose() * &x;
            let xty = x.transpose() * &yv;
            let theta = xtx
                .cholesky()
                .map(|c| c.solve(&xty))
                .ok_or_else(|| Error::Estimation("working model: singular design".into()))?;
            let resid = &yv - &x * &theta;
            let rss = resid.norm_squared();
            let s2 = rss / (n - p) as f64;
            // keep a strictly positive variance for interpolating data
            let s2 = if s2 > 0.0 { s2 } else { f64::MIN_POSITIVE.sqrt() };
            Ok(WorkingFit { theta: theta.iter().copied().collect(), aux_variance: Some(s2), iterations: 1 })
        }
    }
}

/// Maximum-likelihood `α̂` from the rows with `S = 1`.
pub fn fit_selection_mle(data: &Dataset, selection: &SelectionModel) -> Result<Vec<f64>> {
    let rows = data.records.iter().filter(|r| r.s);
    match &selection.form {
        SelectionForm::Logistic { .. } => {
            let (design, resp): (Vec<Vec<f64>>, Vec<f64>) =
                rows.map(|r| (selection.terms(r.y, &r.x), if r.r { 1.0 } else { 0.0 })).unzip();
            Ok(logistic_newton(&design, &resp, "selection model")?.0)
        }
        SelectionForm::Stratified { .. } => {
            let k = selection.dim();
            let mut eligible = vec![0usize; k];
            let mut chosen = vec![0usize; k];
            for r in rows {
                if let Some(c) = selection.cell_index(r.y, &r.x) {
                    eligible[c] += 1;
                    if r.r {
                        chosen[c] += 1;
                    }
                }
            }
            (0..k)
                .map(|c| {
                    if eligible[c] == 0 {
                        return Err(Error::Estimation(format!("selection stratum {} is empty", c + 1)));
                    }
                    let a = chosen[c] as f64 / eligible[c] as f64;
                    if a <= 0.0 || a >= 1.0 {
                        return Err(Error::Estimation(format!(
                            "selection stratum {} has estimated probability {a} on the boundary",
                            c + 1
                        )));
                    }
                    Ok(a)
                })
                .collect()
        }
    }
}
