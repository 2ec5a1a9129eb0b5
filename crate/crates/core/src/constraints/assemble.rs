//! Per-subject constraint vectors `g_i(η)` for every estimator variant.

use std::cell::RefCell;
use std::ops::Range;
use std::rc::Rc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::functions::{h_star, u_from_rule, v_from_rule};
use crate::error::{Error, Result};
use crate::model::{CondRule, Dataset, ModelSpec, ObservationRecord};
use crate::numerics::{finite_diff_jacobian, StepRule};

/// Constraint families.
///
/// `PiTheta1` and `PiTheta2` use phase-2 subjects only, with `α` and `θ`
/// held at supplied values. The `Joint*` variants use every phase-1 subject
/// and estimate `θ` (and `α` unless it is fixed) jointly with `β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Conditional likelihood times an empirical likelihood constrained by `u`.
    PiTheta1,
    /// Empirical likelihood constrained by `(s_cβ, u)`.
    PiTheta2,
    /// `(R s_cβ, R u, s_α, h)`.
    Joint3,
    /// `(R s_cβ, R u, R s_cα, s_α, h)`.
    Joint4,
    /// `(R s_cβ, R u, s_α − R s_cα, h)`.
    Joint5,
}

impl Variant {
    pub fn is_joint(&self) -> bool {
        matches!(self, Variant::Joint3 | Variant::Joint4 | Variant::Joint5)
    }

    pub fn number(&self) -> u8 {
        match self {
            Variant::PiTheta1 => 1,
            Variant::PiTheta2 => 2,
            Variant::Joint3 => 3,
            Variant::Joint4 => 4,
            Variant::Joint5 => 5,
        }
    }
}

/// Whether a nuisance parameter is estimated or held at a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamMode {
    Free,
    Fixed(Vec<f64>),
}

impl ParamMode {
    pub fn fixed(&self) -> Option<&[f64]> {
        match self {
            ParamMode::Free => None,
            ParamMode::Fixed(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintConfig {
    pub variant: Variant,
    /// Use `v`, `h*` and `S`-weighted blocks (needed when `D` is proper).
    pub zero_prob: bool,
    pub alpha: ParamMode,
    pub theta: ParamMode,
}

impl ConstraintConfig {
    /// Defaults: zero-probability form iff the support is proper; joint
    /// variants estimate everything, phase-2 variants need fixed values.
    pub fn new(variant: Variant, spec: &ModelSpec, alpha: ParamMode, theta: ParamMode) -> Self {
        ConstraintConfig { variant, zero_prob: spec.has_proper_support(), alpha, theta }
    }

    fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if spec.has_proper_support() && !self.zero_prob {
            return Err(Error::WrongVariant(
                "the selection support is proper; use the zero-probability constraint family".into(),
            ));
        }
        if !self.variant.is_joint() && (self.alpha.fixed().is_none() || self.theta.fixed().is_none()) {
            return Err(Error::WrongVariant(format!("variant {:?} needs fixed alpha and theta", self.variant)));
        }
        if self.variant.is_joint() && self.theta.fixed().is_some() {
            return Err(Error::WrongVariant(format!("variant {:?} estimates theta jointly", self.variant)));
        }
        if let Some(a) = self.alpha.fixed() {
            if a.len() != spec.selection.dim() {
                return Err(Error::Input(format!(
                    "fixed alpha has length {}, expected {}",
                    a.len(),
                    spec.selection.dim()
                )));
            }
        }
        if let Some(t) = self.theta.fixed() {
            if t.len() != spec.working.dim() {
                return Err(Error::Input(format!(
                    "fixed theta has length {}, expected {}",
                    t.len(),
                    spec.working.dim()
                )));
            }
        }
        Ok(())
    }
}

/// Where `β`, `α`, `θ` sit inside the stacked parameter `η`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtaLayout {
    pub beta: Range<usize>,
    pub alpha: Option<Range<usize>>,
    pub theta: Option<Range<usize>>,
}

impl EtaLayout {
    pub fn dim(&self) -> usize {
        let mut d = self.beta.end;
        if let Some(r) = &self.alpha {
            d = d.max(r.end);
        }
        if let Some(r) = &self.theta {
            d = d.max(r.end);
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockLabel {
    SCBeta,
    UOrV,
    SCAlpha,
    SAlphaResidual,
    SAlpha,
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectScope {
    Phase2Only,
    AllPhase1,
}

/// Constraint rows evaluated at one `η`.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub variant: Variant,
    pub zero_prob: bool,
    /// `N × q`, one row per subject in scope.
    pub rows: DMatrix<f64>,
    /// Dataset index of each row.
    pub subjects: Vec<usize>,
    pub blocks: Vec<(BlockLabel, Range<usize>)>,
    pub scope: SubjectScope,
    pub layout: EtaLayout,
}

impl ConstraintSet {
    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn block_of(&self, coord: usize) -> Option<BlockLabel> {
        self.blocks.iter().find(|(_, r)| r.contains(&coord)).map(|(b, _)| *b)
    }
}

/// Rows plus the conditional log-likelihood pieces that `PiTheta1` needs.
#[derive(Debug, Clone)]
pub struct RowsEval {
    pub g: DMatrix<f64>,
    /// `Σ log f_c` over phase-2 rows in scope.
    pub loglik: f64,
    /// `s_cβ` per row in scope (phase-2 rows; zero rows for `r = 0`).
    pub s_cbeta: DMatrix<f64>,
}

/// Evaluates constraint rows for a fixed dataset and configuration.
///
/// Keeps the most recent evaluation so that repeated requests at the same
/// `η` (line search, Jacobian, diagnostics) are free.
pub struct ConstraintEngine<'a> {
    pub spec: &'a ModelSpec,
    pub data: &'a Dataset,
    pub config: ConstraintConfig,
    pub layout: EtaLayout,
    pub subjects: Vec<usize>,
    pub blocks: Vec<(BlockLabel, Range<usize>)>,
    q: usize,
    step: StepRule,
    cache: RefCell<Option<(Vec<u64>, Rc<RowsEval>)>>,
}

fn push_block(blocks: &mut Vec<(BlockLabel, Range<usize>)>, label: BlockLabel, len: usize) {
    let start = blocks.last().map_or(0, |(_, r)| r.end);
    if len > 0 {
        blocks.push((label, start..start + len));
    }
}

impl<'a> ConstraintEngine<'a> {
    pub fn new(spec: &'a ModelSpec, data: &'a Dataset, config: ConstraintConfig) -> Result<Self> {
        config.validate(spec)?;
        let kb = spec.outcome.dim();
        let ka = spec.selection.dim();
        let kt = spec.working.dim();
        let alpha_free = config.alpha.fixed().is_none();
        let layout = if config.variant.is_joint() {
            let mut next = kb;
            let alpha = if alpha_free {
                next += ka;
                Some(kb..kb + ka)
            } else {
                None
            };
            let theta = Some(next..next + kt);
            EtaLayout { beta: 0..kb, alpha, theta }
        } else {
            EtaLayout { beta: 0..kb, alpha: None, theta: None }
        };

        let mut blocks = Vec::new();
        match config.variant {
            Variant::PiTheta1 => push_block(&mut blocks, BlockLabel::UOrV, kt),
            Variant::PiTheta2 => {
                push_block(&mut blocks, BlockLabel::SCBeta, kb);
                push_block(&mut blocks, BlockLabel::UOrV, kt);
            }
            Variant::Joint3 | Variant::Joint4 | Variant::Joint5 => {
                push_block(&mut blocks, BlockLabel::SCBeta, kb);
                push_block(&mut blocks, BlockLabel::UOrV, kt);
                match (config.variant, alpha_free) {
                    (Variant::Joint4, true) => {
                        push_block(&mut blocks, BlockLabel::SCAlpha, ka);
                        push_block(&mut blocks, BlockLabel::SAlpha, ka);
                    }
                    (Variant::Joint4, false) => push_block(&mut blocks, BlockLabel::SCAlpha, ka),
                    (Variant::Joint3, true) => push_block(&mut blocks, BlockLabel::SAlpha, ka),
                    (Variant::Joint5, true) => push_block(&mut blocks, BlockLabel::SAlphaResidual, ka),
                    _ => {}
                }
                push_block(&mut blocks, BlockLabel::H, kt);
            }
        }
        let q = blocks.last().map_or(0, |(_, r)| r.end);

        let subjects: Vec<usize> = if config.variant.is_joint() {
            (0..data.n()).collect()
        } else {
            (0..data.n()).filter(|&i| data.records[i].r).collect()
        };
        for &i in &subjects {
            if data.records[i].r && data.records[i].z.is_none() {
                return Err(Error::Data { row: i, column: "z".into(), message: "phase-2 subject without z".into() });
            }
        }
        Ok(ConstraintEngine {
            spec,
            data,
            config,
            layout,
            subjects,
            blocks,
            q,
            step: StepRule::default(),
            cache: RefCell::new(None),
        })
    }

    pub fn dim_g(&self) -> usize {
        self.q
    }

    pub fn dim_eta(&self) -> usize {
        self.layout.dim()
    }

    pub fn n_rows(&self) -> usize {
        self.subjects.len()
    }

    pub fn scope(&self) -> SubjectScope {
        if self.config.variant.is_joint() {
            SubjectScope::AllPhase1
        } else {
            SubjectScope::Phase2Only
        }
    }

    /// Split `η` into `(β, α, θ)`, filling fixed values.
    pub fn split(&self, eta: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let beta = eta[self.layout.beta.clone()].to_vec();
        let alpha = match (&self.layout.alpha, self.config.alpha.fixed()) {
            (Some(r), _) => eta[r.clone()].to_vec(),
            (None, Some(a)) => a.to_vec(),
            (None, None) => unreachable!("validated configuration"),
        };
        let theta = match (&self.layout.theta, self.config.theta.fixed()) {
            (Some(r), _) => eta[r.clone()].to_vec(),
            (None, Some(t)) => t.to_vec(),
            (None, None) => unreachable!("validated configuration"),
        };
        (beta, alpha, theta)
    }

    fn row_into(
        &self,
        rec: &ObservationRecord,
        beta: &[f64],
        alpha: &[f64],
        theta: &[f64],
        g: &mut [f64],
        s_cb: &mut [f64],
    ) -> Result<f64> {
        let spec = self.spec;
        g.iter_mut().for_each(|v| *v = 0.0);
        s_cb.iter_mut().for_each(|v| *v = 0.0);
        let mut loglik = 0.0;
        let x = &rec.x;

        if rec.r {
            let z = rec.z_required()?;
            let d = spec.outcome.design(x, z);
            let rule = CondRule::new(spec, &d, x, beta, alpha)?;
            let kb = spec.outcome.dim();
            // s_cβ
            spec.outcome.score_d_into(rec.y, &d, beta, s_cb);
            let mut tmp = vec![0.0; kb];
            for j in 0..rule.len() {
                spec.outcome.score_d_into(rule.nodes[j], &d, beta, &mut tmp);
                let w = rule.fc_weight(j);
                for (o, t) in s_cb.iter_mut().zip(&tmp) {
                    *o -= w * t;
                }
            }
            let pi_y = spec.selection.prob(rec.y, x, alpha)?;
            loglik = spec.outcome.logpdf_d(rec.y, &d, beta)? + pi_y.ln() - rule.mass.ln();

            let uv = if self.config.zero_prob {
                let hs = h_star(&spec.working, x, theta, spec.support(), &spec.working_quadrature())?;
                v_from_rule(spec, &rule, x, theta, &hs)
            } else {
                u_from_rule(spec, &rule, x, theta)?
            };

            let needs_sca =
                self.blocks.iter().any(|(b, _)| matches!(b, BlockLabel::SCAlpha | BlockLabel::SAlphaResidual));
            let s_ca = if needs_sca {
                let ka = spec.selection.dim();
                let mut out = vec![0.0; ka];
                spec.selection.dlog_prob_into(rec.y, x, alpha, &mut out)?;
                let mut tmp = vec![0.0; ka];
                for j in 0..rule.len() {
                    spec.selection.dlog_prob_into(rule.nodes[j], x, alpha, &mut tmp)?;
                    let w = rule.fc_weight(j);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o -= w * t;
                    }
                }
                out
            } else {
                Vec::new()
            };

            for (label, range) in &self.blocks {
                let dst = &mut g[range.clone()];
                match label {
                    BlockLabel::SCBeta => dst.copy_from_slice(s_cb),
                    BlockLabel::UOrV => dst.copy_from_slice(&uv),
                    BlockLabel::SCAlpha => dst.copy_from_slice(&s_ca),
                    BlockLabel::SAlphaResidual => {
                        spec.selection.score_into(rec.y, x, true, alpha, dst)?;
                        for (o, s) in dst.iter_mut().zip(&s_ca) {
                            *o -= s;
                        }
                    }
                    BlockLabel::SAlpha => spec.selection.score_into(rec.y, x, true, alpha, dst)?,
                    BlockLabel::H => {
                        let dw = spec.working.design(x);
                        spec.working.score_d_into(rec.y, &dw, theta, dst);
                    }
                }
            }
        } else {
            for (label, range) in &self.blocks {
                let dst = &mut g[range.clone()];
                match label {
                    BlockLabel::SAlpha | BlockLabel::SAlphaResidual => {
                        spec.selection.score_into(rec.y, x, false, alpha, dst)?
                    }
                    BlockLabel::H => {
                        let dw = spec.working.design(x);
                        spec.working.score_d_into(rec.y, &dw, theta, dst);
                    }
                    _ => {}
                }
            }
        }
        Ok(loglik)
    }

    fn compute(&self, eta: &[f64]) -> Result<RowsEval> {
        if eta.len() != self.dim_eta() {
            return Err(Error::Input(format!("eta has length {}, expected {}", eta.len(), self.dim_eta())));
        }
        if let Some(bad) = eta.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric { what: "non-finite parameter".into(), location: format!("eta[{bad}]") });
        }
        let (beta, alpha, theta) = self.split(eta);
        let n = self.subjects.len();
        let kb = self.spec.outcome.dim();
        let mut g = DMatrix::zeros(n, self.q);
        let mut s_cbeta = DMatrix::zeros(n, kb);
        let mut gi = vec![0.0; self.q];
        let mut si = vec![0.0; kb];
        let mut loglik = 0.0;
        for (row, &i) in self.subjects.iter().enumerate() {
            let rec = &self.data.records[i];
            loglik += self.row_into(rec, &beta, &alpha, &theta, &mut gi, &mut si).map_err(|e| locate(e, i))?;
            if let Some(j) = gi.iter().position(|v| !v.is_finite()) {
                return Err(Error::Numeric {
                    what: "non-finite constraint value".into(),
                    location: format!("subject {i}, coordinate {j}"),
                });
            }
            for j in 0..self.q {
                g[(row, j)] = gi[j];
            }
            for j in 0..kb {
                s_cbeta[(row, j)] = si[j];
            }
        }
        Ok(RowsEval { g, loglik, s_cbeta })
    }

    /// Rows at `η` (cached for the most recent `η`).
    pub fn eval(&self, eta: &[f64]) -> Result<Rc<RowsEval>> {
        let key: Vec<u64> = eta.iter().map(|v| v.to_bits()).collect();
        if let Some((k, v)) = self.cache.borrow().as_ref() {
            if *k == key {
                return Ok(v.clone());
            }
        }
        let out = Rc::new(self.compute(eta)?);
        *self.cache.borrow_mut() = Some((key, out.clone()));
        Ok(out)
    }

    /// Column derivatives `∂g/∂η_j` (each `N × q`) by central differences.
    pub fn jacobians(&self, eta: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let mut out = Vec::with_capacity(eta.len());
        let mut e = eta.to_vec();
        for j in 0..eta.len() {
            let h = self.step.step(eta[j]);
            e[j] = eta[j] + h;
            let plus = self.compute(&e)?;
            e[j] = eta[j] - h;
            let minus = self.compute(&e)?;
            e[j] = eta[j];
            out.push((plus.g - minus.g) / (2.0 * h));
        }
        Ok(out)
    }

    /// Mean Jacobian `Σ_i w_i ∂g_i/∂η` (`q × p`); uniform `1/N` weights by default.
    pub fn mean_jacobian(dg: &[DMatrix<f64>], weights: Option<&[f64]>) -> DMatrix<f64> {
        let q = dg.first().map_or(0, |d| d.ncols());
        let n = dg.first().map_or(0, |d| d.nrows());
        let w = match weights {
            Some(w) => nalgebra::DVector::from_column_slice(w),
            None => nalgebra::DVector::from_element(n, 1.0 / n as f64),
        };
        let mut out = DMatrix::zeros(q, dg.len());
        for (j, d) in dg.iter().enumerate() {
            out.set_column(j, &(d.transpose() * &w));
        }
        out
    }

    pub fn constraint_set(&self, eta: &[f64]) -> Result<ConstraintSet> {
        let ev = self.eval(eta)?;
        Ok(ConstraintSet {
            variant: self.config.variant,
            zero_prob: self.config.zero_prob,
            rows: ev.g.clone(),
            subjects: self.subjects.clone(),
            blocks: self.blocks.clone(),
            scope: self.scope(),
            layout: self.layout.clone(),
        })
    }

    /// Jacobian of a single subject's row, for checks.
    pub fn row_jacobian(&self, row: usize, eta: &[f64]) -> Result<DMatrix<f64>> {
        let i = self.subjects[row];
        let rec = &self.data.records[i];
        finite_diff_jacobian(
            |e| {
                let (b, a, t) = self.split(e);
                let mut g = vec![0.0; self.q];
                let mut s = vec![0.0; self.spec.outcome.dim()];
                self.row_into(rec, &b, &a, &t, &mut g, &mut s)?;
                Ok(g)
            },
            eta,
            self.step,
        )
    }
}

fn locate(e: Error, subject: usize) -> Error {
    match e {
        Error::Numeric { what, location } => {
            Error::Numeric { what, location: format!("subject {subject}: {location}") }
        }
        Error::Domain(m) => Error::Domain(format!("subject {subject}: {m}")),
        other => other,
    }
}

/// Evaluate the constraint rows of `config` at `η`.
pub fn assemble_constraints(
    config: &ConstraintConfig,
    data: &Dataset,
    eta: &[f64],
    spec: &ModelSpec,
) -> Result<ConstraintSet> {
    ConstraintEngine::new(spec, data, config.clone())?.constraint_set(eta)
}

/// Numerical rank of the stacked constraint rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub rank: usize,
    pub dim: usize,
    pub singular_values: Vec<f64>,
    /// Coordinates loading on the numerically null directions, with block labels.
    pub near_dependent: Vec<(usize, BlockLabel)>,
}

impl RankReport {
    pub fn is_deficient(&self) -> bool {
        self.rank < self.dim
    }
}

/// Relative singular-value tolerance for rank decisions.
pub const RANK_RTOL: f64 = 1e-10;

pub fn rank_check(cs: &ConstraintSet) -> RankReport {
    let dim = cs.dim();
    if cs.rows.nrows() == 0 || dim == 0 {
        return RankReport { rank: 0, dim, singular_values: vec![], near_dependent: vec![] };
    }
    // QR first so the SVD is only q × q
    let r = if cs.rows.nrows() > dim { cs.rows.clone().qr().r() } else { cs.rows.clone() };
    let svd = r.svd(false, true);
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let tol = RANK_RTOL * max;
    let rank = sv.iter().filter(|&&s| s > tol).count();
    let mut near = Vec::new();
    if let Some(vt) = svd.v_t {
        for (k, &s) in sv.iter().enumerate() {
            if s <= tol {
                for c in 0..dim {
                    if vt[(k, c)].abs() > 0.1 && !near.iter().any(|(cc, _)| *cc == c) {
                        near.push((c, cs.block_of(c).expect("blocks cover all coordinates")));
                    }
                }
            }
        }
    }
    near.sort_by_key(|(c, _)| *c);
    RankReport { rank, dim: dim.min(cs.rows.nrows()), singular_values: sv, near_dependent: near }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_selection_mle, fit_working};
    use crate::sim::{simulate_dataset, ScenarioConfig};

    fn setup() -> (ModelSpec, Dataset, Vec<f64>) {
        let mut sc = ScenarioConfig::preset("table1-small").unwrap();
        sc.n = 1500;
        sc.master_seed = 12;
        let data = simulate_dataset(&sc, 0).unwrap();
        let spec = sc.model_spec().unwrap();
        let mut eta = sc.beta0.clone();
        eta.extend(fit_selection_mle(&data, &spec.selection).unwrap());
        eta.extend(fit_working(&data, &spec.working).unwrap().theta);
        (spec, data, eta)
    }

    #[test]
    fn joint_family_shapes_and_rank() {
        let (spec, data, eta) = setup();
        let report = |v| {
            let cfg = ConstraintConfig::new(v, &spec, ParamMode::Free, ParamMode::Free);
            let cs = assemble_constraints(&cfg, &data, &eta, &spec).unwrap();
            assert_eq!(cs.rows.nrows(), data.n());
            rank_check(&cs)
        };
        let (r3, r4, r5) = (report(Variant::Joint3), report(Variant::Joint4), report(Variant::Joint5));
        assert_eq!((r3.dim, r3.rank), (9, 9));
        assert_eq!((r5.dim, r5.rank), (9, 9));
        assert_eq!(r4.dim, 11);
        assert_eq!(r4.rank, 9);
        assert!(r4.near_dependent.iter().any(|(_, b)| *b == BlockLabel::SCAlpha));
    }

    #[test]
    fn unselected_rows_carry_only_phase1_blocks() {
        let (spec, data, eta) = setup();
        let cfg = ConstraintConfig::new(Variant::Joint5, &spec, ParamMode::Free, ParamMode::Free);
        let cs = assemble_constraints(&cfg, &data, &eta, &spec).unwrap();
        let (_, sc_beta) = cs.blocks.iter().find(|(b, _)| *b == BlockLabel::SCBeta).unwrap();
        for i in (0..data.n()).filter(|&i| !data.records[i].r) {
            for c in sc_beta.clone() {
                assert_eq!(cs.rows[(i, c)], 0.0, "row {i}");
            }
        }
    }
}
