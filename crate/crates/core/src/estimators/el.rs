//! Empirical-likelihood estimators: the nested profile maximization over
//! `η` with the dual solved out, plus their covariance.

use std::rc::Rc;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::cml::{cml_beta, AlphaSource};
use super::dual::{el_inner_lambda_from, DualSolution, InnerOptions};
use super::nuisance::fit_working;
use super::result::{to_rows, Diagnostics, FitResult};
use crate::constraints::{rank_check, ConstraintConfig, ConstraintEngine, ParamMode, RowsEval, Variant, RANK_RTOL};
use crate::error::{Error, Result};
use crate::inference::{plugin_variance, sandwich_variance, Covariance, PluginTerm};
use crate::model::{Dataset, ModelSpec};
use crate::numerics::linalg::psd_inverse;
use crate::numerics::rng::{Purpose, StreamKey};
use crate::numerics::{finite_diff_jacobian, StepRule};

/// Where the working-model parameters come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSource {
    /// Held at a supplied value (typically the population limit `θ*`).
    Fixed(Vec<f64>),
    /// Fitted to the phase-1 data (plugged in, or estimated jointly).
    Estimated,
}

/// One empirical-likelihood estimator: constraint family plus nuisance sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElEstimator {
    pub variant: Variant,
    pub alpha: AlphaSource,
    pub theta: ThetaSource,
}

impl ElEstimator {
    /// Joint estimation with constraint family 5 and `α̂` by maximum likelihood.
    pub fn recommended() -> Self {
        ElEstimator { variant: Variant::Joint5, alpha: AlphaSource::Mle, theta: ThetaSource::Estimated }
    }

    pub fn name(&self) -> String {
        let n = self.variant.number();
        if self.variant.is_joint() {
            match self.alpha {
                AlphaSource::Known(_) => format!("EL{n}-pi"),
                AlphaSource::Mle => format!("EL{n}"),
                AlphaSource::PostStratified(_) => format!("EL{n}-ps"),
            }
        } else {
            let pi = match self.alpha {
                AlphaSource::Known(_) => "pi",
                AlphaSource::Mle => "pihat",
                AlphaSource::PostStratified(_) => "pihat-ps",
            };
            let th = match self.theta {
                ThetaSource::Fixed(_) => "thetastar",
                ThetaSource::Estimated => "thetahat",
            };
            format!("EL-{pi}-{th}-{n}")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Stop when the profile gradient max-norm falls below this.
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub inner: InnerOptions,
    /// Override the constraint family choice (`v` instead of `u`).
    pub zero_prob: Option<bool>,
    /// Restart from jittered initial values and flag differing optima.
    pub check_multimodality: bool,
    /// Relative size of the jitter.
    pub jitter: f64,
    /// Drop linearly dependent constraint coordinates instead of failing.
    pub reduce_dependent: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            outer_tol: 1e-6,
            outer_max_iter: 500,
            inner: InnerOptions::default(),
            zero_prob: None,
            check_multimodality: false,
            jitter: 0.05,
            reduce_dependent: false,
        }
    }
}

/// Starting values and the resolved model for one estimator.
#[derive(Debug, Clone)]
pub struct InitialValues {
    pub spec: ModelSpec,
    pub config: ConstraintConfig,
    pub eta0: Vec<f64>,
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
}

/// `β₀` from conditional maximum likelihood, `α₀` from the selection
/// likelihood (or its known value), `θ₀` from the working-model fit.
pub fn init_strategy(est: &ElEstimator, data: &Dataset, spec: &ModelSpec, opts: &FitOptions) -> Result<InitialValues> {
    let (mut spec, alpha) = est.alpha.resolve(data, spec)?;
    let needs_fit = matches!(est.theta, ThetaSource::Estimated) || spec.working.aux_variance.is_none();
    let wfit = if needs_fit { Some(fit_working(data, &spec.working)?) } else { None };
    if spec.working.aux_variance.is_none() {
        if let Some(w) = &wfit {
            spec.working = w.apply(&spec.working);
        }
    }
    let theta = match &est.theta {
        ThetaSource::Fixed(t) => t.clone(),
        ThetaSource::Estimated => wfit.as_ref().expect("fitted above").theta.clone(),
    };
    let (beta, ..) = cml_beta(&spec, data, &alpha, None)?;

    let alpha_mode = match (&est.alpha, est.variant.is_joint()) {
        (AlphaSource::Known(a), _) => ParamMode::Fixed(a.clone()),
        (_, true) => ParamMode::Free,
        (_, false) => ParamMode::Fixed(alpha.clone()),
    };
    let theta_mode = if est.variant.is_joint() {
        if let ThetaSource::Fixed(_) = est.theta {
            return Err(Error::WrongVariant(format!("{} estimates theta jointly", est.name())));
        }
        ParamMode::Free
    } else {
        ParamMode::Fixed(theta.clone())
    };
    let mut config = ConstraintConfig::new(est.variant, &spec, alpha_mode, theta_mode);
    if let Some(z) = opts.zero_prob {
        config.zero_prob = z;
    }
    let mut eta0 = beta;
    if est.variant.is_joint() {
        if config.alpha.fixed().is_none() {
            eta0.extend_from_slice(&alpha);
        }
        eta0.extend_from_slice(&theta);
    }
    Ok(InitialValues { spec, config, eta0, alpha, theta })
}

/// Constraint rows with an optional column subset, and the profile built on them.
struct Profile<'a> {
    engine: ConstraintEngine<'a>,
    keep: Option<Vec<usize>>,
    with_loglik: bool,
    inner: InnerOptions,
}

struct Point {
    eta: Vec<f64>,
    value: f64,
    dual: DualSolution,
    rows: Rc<RowsEval>,
    g: DMatrix<f64>,
}

impl Profile<'_> {
    fn select(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.keep {
            Some(k) => m.select_columns(k),
            None => m.clone(),
        }
    }

    fn at(&self, eta: &[f64], start: Option<&DVector<f64>>) -> Result<Point> {
        let rows = self.engine.eval(eta)?;
        let g = self.select(&rows.g);
        let dual = el_inner_lambda_from(&g, start, &self.inner)?;
        let mut value = dual.log_el_ratio;
        if self.with_loglik {
            value += rows.loglik;
        }
        Ok(Point { eta: eta.to_vec(), value, dual, rows, g })
    }

    fn derivatives(&self, eta: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        Ok(self.engine.jacobians(eta)?.iter().map(|d| self.select(d)).collect())
    }

    /// Envelope gradient and Gauss–Newton curvature of the profile.
    fn gradient(&self, pt: &Point, dg: &[DMatrix<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let p = dg.len();
        let n = pt.g.nrows() as f64;
        let lam = &pt.dual.lambda;
        let w: DVector<f64> = (&pt.g * lam).map(|t| 1.0 / (1.0 - t));
        let mut grad = DVector::zeros(p);
        for (j, d) in dg.iter().enumerate() {
            grad[j] = (d * lam).dot(&w);
        }
        let pv = DVector::from_column_slice(&pt.dual.p);
        let gbar = ConstraintEngine::mean_jacobian(dg, Some(pt.dual.p.as_slice()));
        let mut wg = pt.g.clone();
        for (i, mut row) in wg.row_iter_mut().enumerate() {
            row *= pv[i].sqrt();
        }
        let omega = wg.transpose() * wg;
        let oinv = ridge_inverse(&omega)?;
        let mut curv = gbar.transpose() * oinv * &gbar * n;
        if self.with_loglik {
            let s = &pt.rows.s_cbeta;
            let k = s.ncols();
            let sum = s.row_sum();
            for j in 0..k {
                grad[j] += sum[j];
            }
            let bhhh = s.transpose() * s;
            let mut view = curv.view_mut((0, 0), (k, k));
            view += bhhh;
        }
        Ok((grad, curv))
    }
}

fn ridge_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Ok(inv) = psd_inverse(a) {
        return Ok(inv.inv);
    }
    let q = a.nrows().max(1) as f64;
    let ridge = 1e-10 * (a.trace() / q).max(1e-300);
    let mut b = a.clone();
    for i in 0..b.nrows() {
        b[(i, i)] += ridge;
    }
    Ok(psd_inverse(&b)?.inv)
}

fn ascent_step(curv: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    if let Some(ch) = curv.clone().cholesky() {
        return ch.solve(grad);
    }
    let scale = curv.diagonal().iter().map(|v| v.abs()).fold(0.0, f64::max);
    let ridge = 1e-8 * scale.max(1.0);
    let mut c = curv.clone();
    for i in 0..c.nrows() {
        c[(i, i)] += ridge;
    }
    match c.cholesky() {
        Some(ch) => ch.solve(grad),
        None => grad / scale.max(1.0),
    }
}

struct Outcome {
    point: Point,
    grad_max: f64,
    iterations: usize,
}

fn maximize(prof: &Profile<'_>, eta0: &[f64], tol: f64, max_iter: usize) -> Result<Outcome> {
    let mut pt = prof.at(eta0, None)?;
    for iter in 0..max_iter {
        let dg = prof.derivatives(&pt.eta)?;
        let (grad, curv) = prof.gradient(&pt, &dg)?;
        let gm = grad.amax();
        if !gm.is_finite() {
            return Err(Error::Numeric { what: "non-finite profile gradient".into(), location: "outer loop".into() });
        }
        if gm < tol {
            return Ok(Outcome { point: pt, grad_max: gm, iterations: iter });
        }
        let step = ascent_step(&curv, &grad);
        let slope = grad.dot(&step);
        let negligible = slope.abs() < 1e-10 * (1.0 + pt.value.abs());
        let mut t = 1.0;
        let mut next = None;
        while t > 1e-10 {
            let cand: Vec<f64> = pt.eta.iter().zip(step.iter()).map(|(e, s)| e + t * s).collect();
            if let Ok(c) = prof.at(&cand, Some(&pt.dual.lambda)) {
                let ok = c.value >= pt.value + 1e-4 * t * slope
                    || (negligible && c.value >= pt.value - 1e-10 * (1.0 + pt.value.abs()));
                if ok {
                    next = Some(c);
                    break;
                }
            }
            t *= 0.5;
        }
        match next {
            Some(c) => pt = c,
            None => {
                return Err(Error::NonConvergence {
                    iterations: iter,
                    detail: format!("profile line search failed with gradient max-norm {gm:.3e}"),
                })
            }
        }
    }
    let dg = prof.derivatives(&pt.eta)?;
    let (grad, _) = prof.gradient(&pt, &dg)?;
    let gm = grad.amax();
    if gm < tol {
        Ok(Outcome { point: pt, grad_max: gm, iterations: max_iter })
    } else {
        Err(Error::NonConvergence { iterations: max_iter, detail: format!("profile gradient max-norm {gm:.3e}") })
    }
}

/// Columns of `g` kept by a greedy pivoted Cholesky of `gᵀg` in natural order.
fn independent_columns(g: &DMatrix<f64>) -> Vec<usize> {
    let q = g.ncols();
    let a = g.transpose() * g;
    let max_diag = (0..q).map(|i| a[(i, i)]).fold(0.0, f64::max);
    let tol = RANK_RTOL * RANK_RTOL * max_diag;
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut keep = Vec::new();
    for j in 0..q {
        let mut r = g.column(j).into_owned();
        for b in &basis {
            let c = b.dot(&r);
            r -= b * c;
        }
        let nr = r.norm_squared();
        if nr > tol && nr > 1e-300 {
            basis.push(r / nr.sqrt());
            keep.push(j);
        }
    }
    keep
}

/// The profile objective `−Σ log(1 − λ̂ᵀg_i)` at `η`, plus `Σ log f_c` for
/// the variant that carries the conditional likelihood.
pub fn el_profile_loglik(
    config: &ConstraintConfig,
    data: &Dataset,
    spec: &ModelSpec,
    eta: &[f64],
    inner: &InnerOptions,
) -> Result<f64> {
    let engine = ConstraintEngine::new(spec, data, config.clone())?;
    let prof = Profile { engine, keep: None, with_loglik: config.variant == Variant::PiTheta1, inner: *inner };
    Ok(prof.at(eta, None)?.value)
}

/// Gradient of the profile objective at `η` by the envelope theorem.
pub fn el_profile_gradient(
    config: &ConstraintConfig,
    data: &Dataset,
    spec: &ModelSpec,
    eta: &[f64],
    inner: &InnerOptions,
) -> Result<Vec<f64>> {
    let engine = ConstraintEngine::new(spec, data, config.clone())?;
    let prof = Profile { engine, keep: None, with_loglik: config.variant == Variant::PiTheta1, inner: *inner };
    let pt = prof.at(eta, None)?;
    let dg = prof.derivatives(eta)?;
    Ok(prof.gradient(&pt, &dg)?.0.iter().copied().collect())
}

/// Fit one empirical-likelihood estimator.
pub fn fit_el(data: &Dataset, spec: &ModelSpec, est: &ElEstimator, opts: &FitOptions) -> Result<FitResult> {
    let init = init_strategy(est, data, spec, opts)?;
    fit_el_from(data, est, opts, init)
}

/// Fit from explicit starting values.
pub fn fit_el_from(data: &Dataset, est: &ElEstimator, opts: &FitOptions, init: InitialValues) -> Result<FitResult> {
    let spec = &init.spec;
    let engine = ConstraintEngine::new(spec, data, init.config.clone())?;
    let mut diagnostics = Diagnostics { jacobian: "central finite differences".into(), ..Diagnostics::default() };

    let cs = engine.constraint_set(&init.eta0)?;
    let report = rank_check(&cs);
    let mut keep = None;
    if report.is_deficient() {
        if opts.reduce_dependent {
            let k = independent_columns(&cs.rows);
            diagnostics
                .warnings
                .push(format!("dropped {} linearly dependent constraint coordinates", cs.dim() - k.len()));
            keep = Some(k);
        } else {
            let advice = if est.variant == Variant::Joint4 {
                "constraint family 4 repeats information already in s_cbeta for this design; use EL5, or set reduce_dependent".to_string()
            } else {
                format!("constraint coordinates {:?} are linearly dependent", report.near_dependent)
            };
            return Err(Error::RankDeficient { rank: report.rank, dim: report.dim, advice });
        }
    }
    diagnostics.rank = Some(report);

    let prof = Profile { engine, keep, with_loglik: est.variant == Variant::PiTheta1, inner: opts.inner };
    let out = maximize(&prof, &init.eta0, opts.outer_tol, opts.outer_max_iter)?;

    if opts.check_multimodality {
        let mut rng = StreamKey::new(0, 0, Purpose::Init).rng();
        let mut values = vec![out.point.value];
        for _ in 0..3 {
            let start: Vec<f64> = init
                .eta0
                .iter()
                .map(|e| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    e + opts.jitter * (1.0 + e.abs()) * z
                })
                .collect();
            if let Ok(o) = maximize(&prof, &start, opts.outer_tol, opts.outer_max_iter) {
                values.push(o.point.value);
            }
        }
        let spread = values.iter().any(|v| (v - out.point.value).abs() > 1e-4);
        diagnostics.multimodal = Some(spread);
        if spread {
            diagnostics.warnings.push(format!("jittered restarts reached profile values {values:?}"));
        }
    }

    let pt = &out.point;
    let k = spec.outcome.dim();
    let cov = covariance(&prof, est, data, &init, pt)?;
    let bcov = cov.block(0..k);
    diagnostics.converged = true;
    diagnostics.iterations = out.iterations;
    diagnostics.gradient_max = out.grad_max;
    diagnostics.constraint_residual = Some(pt.dual.residual);
    diagnostics.sum_p = Some(pt.dual.p.iter().sum());
    diagnostics.condition_number = cov.cond;
    diagnostics.conditioning = cov.conditioning;
    if cov.conditioning.is_warning() {
        diagnostics.warnings.push(format!("covariance condition number {:.3e}", cov.cond));
    }

    let (beta, alpha, theta) = prof.engine.split(&pt.eta);
    let beta_names = spec.outcome.beta_names(&data.x_names, &data.z_names);
    let mut eta_names = beta_names.clone();
    if prof.engine.layout.alpha.is_some() {
        eta_names.extend(spec.selection.alpha_names(&data.x_names));
    }
    if prof.engine.layout.theta.is_some() {
        eta_names.extend(spec.working.theta_names(&data.x_names));
    }
    let eta_cov = if cov.cov.nrows() == pt.eta.len() { Some(to_rows(&cov.cov)) } else { None };
    Ok(FitResult {
        estimator: est.name(),
        variant: Some(est.variant),
        beta_names,
        beta_se: (0..k).map(|i| bcov[(i, i)].max(0.0).sqrt()).collect(),
        beta_cov: to_rows(&bcov),
        beta,
        alpha: Some(alpha),
        theta: Some(theta),
        eta_names,
        eta: pt.eta.clone(),
        eta_cov,
        lambda: pt.dual.lambda.iter().copied().collect(),
        p_hat: pt.dual.p.clone(),
        profile_loglik: Some(pt.value),
        diagnostics,
    })
}

fn covariance(
    prof: &Profile<'_>,
    est: &ElEstimator,
    data: &Dataset,
    init: &InitialValues,
    pt: &Point,
) -> Result<Covariance> {
    if est.variant.is_joint() {
        let dg = prof.derivatives(&pt.eta)?;
        let gbar = ConstraintEngine::mean_jacobian(&dg, None);
        return sandwich_variance(&pt.g, &gbar);
    }
    // both phase-2 variants share the (s_cβ, u) system for inference
    let spec = &init.spec;
    let (beta, alpha, theta) = prof.engine.split(&pt.eta);
    let config2 = |a: &[f64], t: &[f64]| ConstraintConfig {
        variant: Variant::PiTheta2,
        zero_prob: prof.engine.config.zero_prob,
        alpha: ParamMode::Fixed(a.to_vec()),
        theta: ParamMode::Fixed(t.to_vec()),
    };
    let engine = ConstraintEngine::new(spec, data, config2(&alpha, &theta))?;
    let g = engine.eval(&beta)?.g.clone();
    let g_beta = ConstraintEngine::mean_jacobian(&engine.jacobians(&beta)?, None);
    let mean_g = |a: &[f64], t: &[f64]| -> Result<Vec<f64>> {
        let e = ConstraintEngine::new(spec, data, config2(a, t))?;
        let rows = e.eval(&beta)?;
        let m = rows.g.nrows() as f64;
        Ok(rows.g.row_sum().iter().map(|v| v / m).collect())
    };
    let rule = StepRule::default();
    let n = data.n();

    let mut owned: Vec<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> = Vec::new();
    if let ThetaSource::Estimated = est.theta {
        let g_deriv = finite_diff_jacobian(|t| mean_g(&alpha, t), &theta, rule)?;
        let working = &spec.working;
        let psi = DMatrix::from_fn(n, working.dim(), |i, j| {
            let r = &data.records[i];
            working.score(r.y, &r.x, &theta)[j]
        });
        let psi_deriv = finite_diff_jacobian(
            |t| {
                let mut acc = vec![0.0; working.dim()];
                for r in &data.records {
                    for (a, v) in acc.iter_mut().zip(working.score(r.y, &r.x, t)) {
                        *a += v / n as f64;
                    }
                }
                Ok(acc)
            },
            &theta,
            rule,
        )?;
        owned.push((g_deriv, psi_deriv, psi));
    }
    if est.alpha.is_estimated() {
        let sel = &spec.selection;
        let g_deriv = finite_diff_jacobian(|a| mean_g(a, &theta), &alpha, rule)?;
        let mut psi = DMatrix::zeros(n, sel.dim());
        let mut buf = vec![0.0; sel.dim()];
        for (i, r) in data.records.iter().enumerate() {
            sel.score_into(r.y, &r.x, r.r, &alpha, &mut buf)?;
            for (j, v) in buf.iter().enumerate() {
                psi[(i, j)] = *v;
            }
        }
        let psi_deriv = finite_diff_jacobian(
            |a| {
                let mut acc = vec![0.0; sel.dim()];
                let mut b = vec![0.0; sel.dim()];
                for r in &data.records {
                    sel.score_into(r.y, &r.x, r.r, a, &mut b)?;
                    for (x, v) in acc.iter_mut().zip(&b) {
                        *x += v / n as f64;
                    }
                }
                Ok(acc)
            },
            &alpha,
            rule,
        )?;
        owned.push((g_deriv, psi_deriv, psi));
    }
    let terms: Vec<PluginTerm<'_>> =
        owned.iter().map(|(g_deriv, psi_deriv, psi)| PluginTerm { g_deriv, psi_deriv, psi }).collect();
    plugin_variance(&g, &g_beta, &engine.subjects, n, &terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names() {
        assert_eq!(ElEstimator::recommended().name(), "EL5");
        let e = ElEstimator {
            variant: Variant::PiTheta1,
            alpha: AlphaSource::Known(vec![0.0]),
            theta: ThetaSource::Estimated,
        };
        assert_eq!(e.name(), "EL-pi-thetahat-1");
        let e = ElEstimator {
            variant: Variant::PiTheta2,
            alpha: AlphaSource::Known(vec![0.0]),
            theta: ThetaSource::Fixed(vec![]),
        };
        assert_eq!(e.name(), "EL-pi-thetastar-2");
    }

    #[test]
    fn independent_columns_drops_duplicates() {
        let g = DMatrix::from_row_slice(4, 3, &[1.0, 2.0, 0.5, -1.0, -2.0, 0.1, 0.3, 0.6, -0.7, 0.2, 0.4, 0.9]);
        assert_eq!(independent_columns(&g), vec![0, 2]);
    }
}
