//! Inner Lagrange-dual solve for the empirical probabilities.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerOptions {
    /// Stop when `max |Σ p_i g_i|` falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep `1 − λᵀg_i > guard / N`; `1.0` is the usual `p_i ≤ 1` guard.
    pub guard: f64,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions { tol: 1e-13, max_iter: 200, guard: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub lambda: DVector<f64>,
    /// `p_i = 1 / (N (1 − λᵀg_i))`, normalized to sum to one.
    pub p: Vec<f64>,
    /// `−Σ log(1 − λᵀg_i)` at the solution (`≤ 0`).
    pub log_el_ratio: f64,
    /// `max |Σ p_i g_i|`.
    pub residual: f64,
    pub iterations: usize,
}

impl DualSolution {
    /// `Σ log p_i`.
    pub fn log_el(&self) -> f64 {
        let n = self.p.len() as f64;
        self.log_el_ratio - n * n.ln()
    }
}

fn objective(g: &DMatrix<f64>, lambda: &DVector<f64>, floor: f64) -> Option<(f64, DVector<f64>)> {
    let t = g * lambda;
    let mut f = 0.0;
    let mut d = DVector::zeros(t.len());
    for (i, ti) in t.iter().enumerate() {
        let one = 1.0 - ti;
        if !(one > floor) {
            return None;
        }
        f -= one.ln();
        d[i] = one;
    }
    Some((f, d))
}

/// Minimize `F(λ) = −Σ log(1 − λᵀg_i)` by damped Newton, starting from `start`
/// (or `0`) and falling back to `0` if the start is outside the domain.
pub fn el_inner_lambda_from(
    g: &DMatrix<f64>,
    start: Option<&DVector<f64>>,
    opts: &InnerOptions,
) -> Result<DualSolution> {
    let n = g.nrows();
    let q = g.ncols();
    if n == 0 {
        return Err(Error::Input("no constraint rows".into()));
    }
    let nf = n as f64;
    let floor = opts.guard / nf;
    let zero = DVector::zeros(q);
    let mut lambda = match start {
        Some(s) if s.len() == q && objective(g, s, floor).is_some() => s.clone(),
        _ => zero.clone(),
    };
    let (mut f, mut one) = objective(g, &lambda, floor).ok_or_else(|| Error::Numeric {
        what: "constraint rows are not finite".into(),
        location: "inner dual".into(),
    })?;
    if q == 0 {
        return Ok(finish(g, lambda, &one, f, 0));
    }
    for iter in 0..opts.max_iter {
        let w = one.map(|o| 1.0 / o);
        let grad = g.transpose() * &w;
        let residual = grad.amax() / nf;
        if residual < opts.tol {
            return Ok(finish(g, lambda, &one, f, iter));
        }
        let mut wg = g.clone();
        for (i, mut row) in wg.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let hess = wg.transpose() * &wg;
        let step = newton_step(&hess, &grad)?;
        // a Newton decrement at round-off level cannot reduce F any further
        let decrement = grad.dot(&step);
        if decrement <= 1e-24 * nf && residual < 1e-8 {
            return Ok(finish(g, lambda, &one, f, iter));
        }
        if lambda.amax() * g.amax() > 1e8 {
            return Err(infeasible_or_stuck(&lambda, g, residual, iter));
        }
        // descent direction for F is −H⁻¹∇F; F is self-concordant, so a small
        // decrement puts the full Newton step in the quadratic region
        if decrement < 0.1 {
            let cand = &lambda - &step;
            if let Some((fc, oc)) = objective(g, &cand, floor) {
                lambda = cand;
                f = fc;
                one = oc;
                continue;
            }
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let cand = &lambda - &step * t;
            if let Some((fc, oc)) = objective(g, &cand, floor) {
                if fc <= f + 1e-4 * t * -grad.dot(&step) || (f - fc).abs() <= 1e-14 * (1.0 + f.abs()) {
                    lambda = cand;
                    f = fc;
                    one = oc;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            let residual = (g.transpose() * one.map(|o| 1.0 / o)).amax() / nf;
            if residual < opts.tol.max(1e-10) {
                return Ok(finish(g, lambda, &one, f, iter));
            }
            return Err(infeasible_or_stuck(&lambda, g, residual, iter));
        }
    }
    let w = one.map(|o| 1.0 / o);
    let residual = (g.transpose() * &w).amax() / nf;
    if residual < opts.tol.max(1e-10) {
        return Ok(finish(g, lambda, &one, f, opts.max_iter));
    }
    Err(infeasible_or_stuck(&lambda, g, residual, opts.max_iter))
}

/// [`el_inner_lambda_from`] started at `λ = 0`.
pub fn el_inner_lambda(g: &DMatrix<f64>, opts: &InnerOptions) -> Result<DualSolution> {
    el_inner_lambda_from(g, None, opts)
}

fn newton_step(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(ch) = hess.clone().cholesky() {
        return Ok(ch.solve(grad));
    }
    let ridge = 1e-12 * hess.trace().max(f64::MIN_POSITIVE);
    let mut h = hess.clone();
    for i in 0..h.nrows() {
        h[(i, i)] += ridge;
    }
    h.cholesky().map(|c| c.solve(grad)).ok_or(Error::Singular("inner dual Hessian".into()))
}

fn infeasible_or_stuck(lambda: &DVector<f64>, g: &DMatrix<f64>, residual: f64, iterations: usize) -> Error {
    let scale = g.amax().max(f64::MIN_POSITIVE);
    if lambda.amax() * scale > 1e6 || residual > 1e-3 {
        Error::Infeasible(format!(
            "zero is not inside the convex hull of the constraint rows (|λ| = {:.3e}, residual {:.3e})",
            lambda.amax(),
            residual
        ))
    } else {
        Error::NonConvergence { iterations, detail: format!("inner dual stalled at residual {residual:.3e}") }
    }
}

fn finish(g: &DMatrix<f64>, lambda: DVector<f64>, one: &DVector<f64>, f: f64, iterations: usize) -> DualSolution {
    let n = g.nrows() as f64;
    let raw: Vec<f64> = one.iter().map(|o| 1.0 / (n * o)).collect();
    let total: f64 = raw.iter().sum();
    let p: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let pv = DVector::from_column_slice(&p);
    let residual = (g.transpose() * pv).amax();
    DualSolution { lambda, p, log_el_ratio: f, residual, iterations }
}
