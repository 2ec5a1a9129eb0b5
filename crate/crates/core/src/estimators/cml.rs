//! Conditional maximum likelihood and the stacked-score (SW) estimator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::nuisance::{fit_selection_mle, logistic_newton};
use super::result::{to_rows, Diagnostics, FitResult};
use crate::error::{Error, Result};
use crate::inference::just_identified_variance;
use crate::model::{CondRule, Dataset, Family, ModelSpec, SelectionModel};
use crate::numerics::linalg::psd_inverse;
use crate::numerics::{finite_diff_jacobian, StepRule};

/// Where the selection parameters come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSource {
    /// Design values.
    Known(Vec<f64>),
    /// Maximum likelihood under the model's own selection form.
    Mle,
    /// Maximum likelihood under a richer post-stratification model.
    PostStratified(SelectionModel),
}

impl AlphaSource {
    /// The model specification to use and the selection parameters.
    pub fn resolve(&self, data: &Dataset, spec: &ModelSpec) -> Result<(ModelSpec, Vec<f64>)> {
        match self {
            AlphaSource::Known(a) => {
                if a.len() != spec.selection.dim() {
                    return Err(Error::Input(format!(
                        "known alpha has length {}, expected {}",
                        a.len(),
                        spec.selection.dim()
                    )));
                }
                Ok((spec.clone(), a.clone()))
            }
            AlphaSource::Mle => Ok((spec.clone(), fit_selection_mle(data, &spec.selection)?)),
            AlphaSource::PostStratified(sel) => {
                if sel.support() != spec.selection.support() {
                    return Err(Error::Input("post-stratification must keep the selection support".into()));
                }
                let s = spec.with_selection(sel.clone());
                let a = fit_selection_mle(data, &s.selection)?;
                Ok((s, a))
            }
        }
    }

    pub fn is_estimated(&self) -> bool {
        !matches!(self, AlphaSource::Known(_))
    }
}

/// `Σ log f_c` and the per-row conditional scores over phase-2 rows.
pub(crate) fn cml_terms(spec: &ModelSpec, data: &Dataset, beta: &[f64], alpha: &[f64]) -> Result<(f64, DMatrix<f64>)> {
    let k = spec.outcome.dim();
    let m = data.m();
    let mut scores = DMatrix::zeros(m, k);
    let mut ll = 0.0;
    let mut tmp = vec![0.0; k];
    let mut s = vec![0.0; k];
    for (row, rec) in data.phase2().enumerate() {
        let z = rec.z_required()?;
        let d = spec.outcome.design(&rec.x, z);
        let rule = CondRule::new(spec, &d, &rec.x, beta, alpha)?;
        ll +=
            spec.outcome.logpdf_d(rec.y, &d, beta)? + spec.selection.prob(rec.y, &rec.x, alpha)?.ln() - rule.mass.ln();
        spec.outcome.score_d_into(rec.y, &d, beta, &mut s);
        for j in 0..rule.len() {
            spec.outcome.score_d_into(rule.nodes[j], &d, beta, &mut tmp);
            let w = rule.fc_weight(j);
            for (o, t) in s.iter_mut().zip(&tmp) {
                *o -= w * t;
            }
        }
        for (c, v) in s.iter().enumerate() {
            scores[(row, c)] = *v;
        }
    }
    if !ll.is_finite() {
        return Err(Error::Numeric { what: "non-finite conditional log-likelihood".into(), location: "CML".into() });
    }
    Ok((ll, scores))
}

/// Ordinary maximum likelihood on the phase-2 rows, used as a starting value.
pub(crate) fn phase2_mle(spec: &ModelSpec, data: &Dataset) -> Result<Vec<f64>> {
    let design: Vec<Vec<f64>> =
        data.phase2().map(|r| Ok(spec.outcome.design(&r.x, r.z_required()?))).collect::<Result<_>>()?;
    let y: Vec<f64> = data.phase2().map(|r| r.y).collect();
    match spec.outcome.family {
        Family::Logistic => Ok(logistic_newton(&design, &y, "phase-2 outcome model")?.0),
        Family::LinearGaussian => {
            let p = spec.outcome.n_coef();
            let m = design.len();
            if m <= p {
                return Err(Error::Estimation(format!("{m} phase-2 rows for {p} coefficients")));
            }
            let x = DMatrix::from_fn(m, p, |i, j| design[i][j]);
            let yv = DVector::from_column_slice(&y);
            let b = (x.transpose() * &x)
                .cholesky()
                .map(|c| c.solve(&(x.transpose() * &yv)))
                .ok_or_else(|| Error::Estimation("singular phase-2 design".into()))?;
            let rss = (&yv - &x * &b).norm_squared();
            let mut out: Vec<f64> = b.iter().copied().collect();
            out.push((rss / m as f64).max(1e-8));
            Ok(out)
        }
    }
}

pub(crate) struct NewtonRun {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_max: f64,
    pub iterations: usize,
}

/// Damped Newton ascent; `eval` returns `(value, gradient)` and `curv` a
/// positive-definite curvature (negative Hessian).
pub(crate) fn newton_ascent<E, C>(x0: Vec<f64>, eval: E, curv: C, tol: f64, max_iter: usize) -> Result<NewtonRun>
where
    E: Fn(&[f64]) -> Result<(f64, DVector<f64>)>,
    C: Fn(&[f64], &DVector<f64>) -> Result<DMatrix<f64>>,
{
    let mut x = x0;
    let (mut val, mut grad) = eval(&x)?;
    for iter in 0..max_iter {
        if grad.amax() < tol {
            return Ok(NewtonRun { x, value: val, grad_max: grad.amax(), iterations: iter });
        }
        let c = curv(&x, &grad)?;
        let step = match c.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => {
                // fall back to a scaled gradient step
                let scale = c.diagonal().iter().map(|v| v.abs()).fold(1e-8, f64::max);
                &grad / scale
            }
        };
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            if let Ok((v, g)) = eval(&cand) {
                let small = slope.abs() < 1e-12 * (1.0 + val.abs());
                if v >= val + 1e-4 * t * slope || (small && v >= val - 1e-12 * (1.0 + val.abs())) {
                    x = cand;
                    val = v;
                    grad = g;
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            let gm = grad.amax();
            if gm < tol * 1e3 {
                return Ok(NewtonRun { x, value: val, grad_max: gm, iterations: iter });
            }
            return Err(Error::NonConvergence {
                iterations: iter,
                detail: format!("line search failed with gradient max-norm {gm:.3e}"),
            });
        }
    }
    let gm = grad.amax();
    if gm < tol {
        Ok(NewtonRun { x, value: val, grad_max: gm, iterations: max_iter })
    } else {
        Err(Error::NonConvergence { iterations: max_iter, detail: format!("gradient max-norm {gm:.3e}") })
    }
}

/// Maximize `Σ_{r=1} log f_c(y | x, z; β, α)` with `α` fixed at `alpha`.
pub fn cml_beta(
    spec: &ModelSpec,
    data: &Dataset,
    alpha: &[f64],
    start: Option<&[f64]>,
) -> Result<(Vec<f64>, f64, DMatrix<f64>, usize, f64)> {
    let k = spec.outcome.dim();
    if data.m() < k {
        return Err(Error::Estimation(format!("{} phase-2 rows for {k} parameters", data.m())));
    }
    let x0 = match start {
        Some(s) => s.to_vec(),
        None => phase2_mle(spec, data)?,
    };
    let eval = |b: &[f64]| -> Result<(f64, DVector<f64>)> {
        let (ll, s) = cml_terms(spec, data, b, alpha)?;
        let g = DVector::from_iterator(k, s.row_sum().iter().copied());
        Ok((ll, g))
    };
    let curv = |b: &[f64], _g: &DVector<f64>| -> Result<DMatrix<f64>> {
        let h = finite_diff_jacobian(
            |bb| {
                let (_, s) = cml_terms(spec, data, bb, alpha)?;
                Ok(s.row_sum().iter().copied().collect())
            },
            b,
            StepRule::default(),
        )?;
        let neg = -(&h + h.transpose()) * 0.5;
        if neg.clone().cholesky().is_some() {
            Ok(neg)
        } else {
            let (_, s) = cml_terms(spec, data, b, alpha)?;
            Ok(s.transpose() * s)
        }
    };
    let run = newton_ascent(x0, eval, curv, 1e-9, 200)?;
    let (_, scores) = cml_terms(spec, data, &run.x, alpha)?;
    Ok((run.x, run.value, scores, run.iterations, run.grad_max))
}

/// Conditional maximum likelihood. The covariance is the inverse of the
/// summed outer product of the conditional scores.
pub fn fit_cml(data: &Dataset, spec: &ModelSpec, alpha: &AlphaSource) -> Result<FitResult> {
    let (spec, a) = alpha.resolve(data, spec)?;
    let (beta, ll, scores, iterations, grad_max) = cml_beta(&spec, data, &a, None)?;
    let info = scores.transpose() * &scores;
    let inv = psd_inverse(&info)?;
    let names = spec.outcome.beta_names(&data.x_names, &data.z_names);
    let se: Vec<f64> = (0..beta.len()).map(|i| inv.inv[(i, i)].max(0.0).sqrt()).collect();
    let name = match alpha {
        AlphaSource::Known(_) => "CML-pi",
        AlphaSource::Mle => "CML-pihat",
        AlphaSource::PostStratified(_) => "CML-ps",
    };
    let mut diagnostics = Diagnostics {
        converged: true,
        iterations,
        gradient_max: grad_max,
        condition_number: inv.cond,
        conditioning: inv.conditioning,
        jacobian: "analytic gradient, finite-difference Hessian".into(),
        ..Diagnostics::default()
    };
    if inv.conditioning.is_warning() {
        diagnostics.warnings.push(format!("information matrix condition number {:.3e}", inv.cond));
    }
    Ok(FitResult {
        estimator: name.into(),
        variant: None,
        eta_names: names.clone(),
        eta: beta.clone(),
        eta_cov: None,
        beta_names: names,
        beta_se: se,
        beta_cov: to_rows(&inv.inv),
        beta,
        alpha: Some(a),
        theta: None,
        lambda: Vec::new(),
        p_hat: Vec::new(),
        profile_loglik: Some(ll),
        diagnostics,
    })
}

/// Stacked rows `(R s_cβ, S s_α − R s_cα)` over all phase-1 subjects.
pub(crate) fn sw_rows(spec: &ModelSpec, data: &Dataset, eta: &[f64]) -> Result<DMatrix<f64>> {
    let k = spec.outcome.dim();
    let a = spec.selection.dim();
    let (beta, alpha) = eta.split_at(k);
    let mut out = DMatrix::zeros(data.n(), k + a);
    let mut sb = vec![0.0; k];
    let mut tmp = vec![0.0; k];
    let mut sa = vec![0.0; a];
    let mut ta = vec![0.0; a];
    let mut sel = vec![0.0; a];
    for (i, rec) in data.records.iter().enumerate() {
        spec.selection.score_into(rec.y, &rec.x, rec.r, alpha, &mut sel)?;
        if rec.r {
            let z = rec.z_required()?;
            let d = spec.outcome.design(&rec.x, z);
            let rule = CondRule::new(spec, &d, &rec.x, beta, alpha)?;
            spec.outcome.score_d_into(rec.y, &d, beta, &mut sb);
            spec.selection.dlog_prob_into(rec.y, &rec.x, alpha, &mut sa)?;
            for j in 0..rule.len() {
                let w = rule.fc_weight(j);
                spec.outcome.score_d_into(rule.nodes[j], &d, beta, &mut tmp);
                for (o, t) in sb.iter_mut().zip(&tmp) {
                    *o -= w * t;
                }
                spec.selection.dlog_prob_into(rule.nodes[j], &rec.x, alpha, &mut ta)?;
                for (o, t) in sa.iter_mut().zip(&ta) {
                    *o -= w * t;
                }
            }
            for c in 0..k {
                out[(i, c)] = sb[c];
            }
            for c in 0..a {
                out[(i, k + c)] = sel[c] - sa[c];
            }
        } else {
            for c in 0..a {
                out[(i, k + c)] = sel[c];
            }
        }
    }
    Ok(out)
}

/// Solve the stacked score system `(1/n) Σ (R s_cβ; S s_α − R s_cα) = 0` in
/// `(β, α)` by Newton with a finite-difference Jacobian.
pub fn fit_sw(data: &Dataset, spec: &ModelSpec, selection: Option<&SelectionModel>) -> Result<FitResult> {
    let source = match selection {
        Some(s) => AlphaSource::PostStratified(s.clone()),
        None => AlphaSource::Mle,
    };
    let (spec, a0) = source.resolve(data, spec)?;
    let k = spec.outcome.dim();
    let (b0, ..) = cml_beta(&spec, data, &a0, None)?;
    let mut eta: Vec<f64> = b0.iter().chain(&a0).copied().collect();
    let n = data.n() as f64;
    let mean = |e: &[f64]| -> Result<DVector<f64>> {
        let rows = sw_rows(&spec, data, e)?;
        Ok(DVector::from_iterator(rows.ncols(), rows.row_sum().iter().map(|v| v / n)))
    };
    let jac = |e: &[f64]| finite_diff_jacobian(|x| Ok(mean(x)?.iter().copied().collect()), e, StepRule::default());
    let mut u = mean(&eta)?;
    let mut iterations = 0;
    let tol = 1e-10;
    while u.amax() >= tol {
        if iterations >= 100 {
            return Err(Error::NonConvergence { iterations, detail: format!("SW residual {:.3e}", u.amax()) });
        }
        iterations += 1;
        let a = jac(&eta)?;
        let step = a.clone().lu().solve(&u).ok_or_else(|| Error::Singular("SW Jacobian".into()))?;
        let base = u.norm();
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = eta.iter().zip(step.iter()).map(|(x, s)| x - t * s).collect();
            if let Ok(uc) = mean(&cand) {
                if uc.norm() < (1.0 - 1e-4 * t) * base || uc.amax() < tol {
                    eta = cand;
                    u = uc;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-10 {
                return Err(Error::NonConvergence { iterations, detail: "SW line search failed".into() });
            }
        }
    }
    let rows = sw_rows(&spec, data, &eta)?;
    let a = jac(&eta)?;
    let cov = just_identified_variance(&rows, &a)?;
    let beta = eta[..k].to_vec();
    let bcov = cov.block(0..k);
    let names = spec.outcome.beta_names(&data.x_names, &data.z_names);
    let mut eta_names = names.clone();
    eta_names.extend(spec.selection.alpha_names(&data.x_names));
    let mut diagnostics = Diagnostics {
        converged: true,
        iterations,
        gradient_max: u.amax(),
        condition_number: cov.cond,
        conditioning: cov.conditioning,
        jacobian: "central finite differences".into(),
        ..Diagnostics::default()
    };
    if cov.conditioning.is_warning() {
        diagnostics.warnings.push(format!("estimating-equation Jacobian condition number {:.3e}", cov.cond));
    }
    Ok(FitResult {
        estimator: if selection.is_some() { "SW-ps".into() } else { "SW".into() },
        variant: None,
        beta_names: names,
        beta_se: (0..k).map(|i| bcov[(i, i)].max(0.0).sqrt()).collect(),
        beta_cov: to_rows(&bcov),
        beta,
        alpha: Some(eta[k..].to_vec()),
        theta: None,
        eta_names,
        eta_cov: Some(to_rows(&cov.cov)),
        eta,
        lambda: Vec::new(),
        p_hat: Vec::new(),
        profile_loglik: None,
        diagnostics,
    })
}
