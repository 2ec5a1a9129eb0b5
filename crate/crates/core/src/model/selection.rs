use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{expit, Interval, Support};

/// One regressor of a logistic selection model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "term", rename_all = "snake_case")]
pub enum SelectionTerm {
    Intercept,
    Y,
    /// The phase-1 covariate in column `col`.
    X {
        col: usize,
    },
    /// `I(x[col] ∈ cell)`.
    XIndicator {
        col: usize,
        cell: Interval,
    },
}

impl SelectionTerm {
    #[inline]
    fn value(&self, y: f64, x: &[f64]) -> f64 {
        match self {
            SelectionTerm::Intercept => 1.0,
            SelectionTerm::Y => y,
            SelectionTerm::X { col } => x[*col],
            SelectionTerm::XIndicator { col, cell } => {
                if cell.contains(x[*col]) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Partition of the real line for one phase-1 covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XCells {
    pub col: usize,
    pub cells: Vec<Interval>,
}

impl XCells {
    /// Cells from interior cut points.
    pub fn from_cuts(col: usize, cuts: &[f64]) -> Result<Self> {
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend_from_slice(cuts);
        edges.push(f64::INFINITY);
        let cells = edges.windows(2).map(|w| Interval::try_new(w[0], w[1])).collect::<Result<Vec<_>>>()?;
        Ok(XCells { col, cells })
    }

    fn validate(&self) -> Result<()> {
        let ok = !self.cells.is_empty()
            && self.cells[0].lo == f64::NEG_INFINITY
            && self.cells.last().is_some_and(|c| c.hi == f64::INFINITY)
            && self.cells.windows(2).all(|w| w[0].hi == w[1].lo);
        if ok {
            Ok(())
        } else {
            Err(Error::Input("x cells must partition the real line in order".into()))
        }
    }

    #[inline]
    fn index(&self, x: &[f64]) -> usize {
        let v = x[self.col];
        self.cells.iter().position(|c| c.contains(v)).unwrap_or(self.cells.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum SelectionForm {
    /// `π = expit(αᵀ t(y, x))`.
    Logistic { terms: Vec<SelectionTerm> },
    /// `π = α_jk` on `y ∈ stratum j`, `x ∈ cell k`; zero outside the strata.
    Stratified {
        y_strata: Vec<Interval>,
        #[serde(default)]
        x_cells: Option<XCells>,
    },
}

/// `π(y, x; α) = P(R = 1 | y, x, S = 1)` together with its support `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionModel {
    pub form: SelectionForm,
    support: Support,
}

impl SelectionModel {
    /// Logistic selection, positive everywhere.
    pub fn logistic(terms: Vec<SelectionTerm>) -> Self {
        SelectionModel { form: SelectionForm::Logistic { terms }, support: Support::real_line() }
    }

    /// Logistic selection restricted to a proper support.
    pub fn logistic_on(terms: Vec<SelectionTerm>, support: Support) -> Self {
        SelectionModel { form: SelectionForm::Logistic { terms }, support }
    }

    /// Piecewise-constant selection; the support is the union of the strata.
    pub fn stratified(y_strata: Vec<Interval>, x_cells: Option<XCells>) -> Result<Self> {
        if let Some(c) = &x_cells {
            c.validate()?;
        }
        let support = Support::new(y_strata.clone())?;
        Ok(SelectionModel { form: SelectionForm::Stratified { y_strata, x_cells }, support })
    }

    pub fn from_form(form: SelectionForm, support: Option<Support>) -> Result<Self> {
        match form {
            SelectionForm::Logistic { terms } => Ok(match support {
                Some(s) => SelectionModel::logistic_on(terms, s),
                None => SelectionModel::logistic(terms),
            }),
            SelectionForm::Stratified { y_strata, x_cells } => SelectionModel::stratified(y_strata, x_cells),
        }
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn is_stratified(&self) -> bool {
        matches!(self.form, SelectionForm::Stratified { .. })
    }

    pub fn dim(&self) -> usize {
        match &self.form {
            SelectionForm::Logistic { terms } => terms.len(),
            SelectionForm::Stratified { y_strata, x_cells } => {
                y_strata.len() * x_cells.as_ref().map_or(1, |c| c.cells.len())
            }
        }
    }

    pub fn alpha_names(&self, x_names: &[String]) -> Vec<String> {
        match &self.form {
            SelectionForm::Logistic { terms } => terms
                .iter()
                .map(|t| match t {
                    SelectionTerm::Intercept => "alpha:(Intercept)".to_string(),
                    SelectionTerm::Y => "alpha:y".to_string(),
                    SelectionTerm::X { col } => format!("alpha:{}", x_names[*col]),
                    SelectionTerm::XIndicator { col, cell } => {
                        format!("alpha:I({} in ({}, {}])", x_names[*col], cell.lo, cell.hi)
                    }
                })
                .collect(),
            SelectionForm::Stratified { y_strata, x_cells } => {
                let mut out = Vec::new();
                for j in 0..y_strata.len() {
                    match x_cells {
                        None => out.push(format!("alpha:S{}", j + 1)),
                        Some(c) => {
                            for k in 0..c.cells.len() {
                                out.push(format!("alpha:S{}x{}", j + 1, k + 1));
                            }
                        }
                    }
                }
                out
            }
        }
    }

    /// Index of the stratum × cell containing `(y, x)`; `None` outside `D`.
    pub fn cell_index(&self, y: f64, x: &[f64]) -> Option<usize> {
        match &self.form {
            SelectionForm::Logistic { .. } => None,
            SelectionForm::Stratified { y_strata, x_cells } => {
                let j = y_strata.iter().position(|s| s.contains(y))?;
                Some(match x_cells {
                    None => j,
                    Some(c) => j * c.cells.len() + c.index(x),
                })
            }
        }
    }

    fn check_alpha(&self, alpha: &[f64]) -> Result<()> {
        if alpha.len() != self.dim() {
            return Err(Error::Input(format!("alpha has length {}, expected {}", alpha.len(), self.dim())));
        }
        Ok(())
    }

    /// Logistic regressors `t(y, x)`.
    pub fn terms(&self, y: f64, x: &[f64]) -> Vec<f64> {
        match &self.form {
            SelectionForm::Logistic { terms } => terms.iter().map(|t| t.value(y, x)).collect(),
            SelectionForm::Stratified { .. } => Vec::new(),
        }
    }

    /// `π(y, x; α)`; exactly zero outside `D`.
    pub fn prob(&self, y: f64, x: &[f64], alpha: &[f64]) -> Result<f64> {
        self.check_alpha(alpha)?;
        if !self.support.contains(y) {
            return Ok(0.0);
        }
        match &self.form {
            SelectionForm::Logistic { terms } => {
                let eta: f64 = terms.iter().zip(alpha).map(|(t, a)| t.value(y, x) * a).sum();
                Ok(expit(eta))
            }
            SelectionForm::Stratified { .. } => {
                let idx = self.cell_index(y, x).expect("support is the union of strata");
                let a = alpha[idx];
                if a > 0.0 && a < 1.0 {
                    Ok(a)
                } else {
                    Err(Error::Domain(format!("stratified selection probability alpha[{idx}] = {a} outside (0,1)")))
                }
            }
        }
    }

    /// `∂ log π / ∂α` at a point of `D`, written into `out`.
    pub fn dlog_prob_into(&self, y: f64, x: &[f64], alpha: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        match &self.form {
            SelectionForm::Logistic { terms } => {
                let pi = self.prob(y, x, alpha)?;
                for (o, t) in out.iter_mut().zip(terms) {
                    *o = (1.0 - pi) * t.value(y, x);
                }
            }
            SelectionForm::Stratified { .. } => {
                if let Some(idx) = self.cell_index(y, x) {
                    let a = self.prob(y, x, alpha)?;
                    out[idx] = 1.0 / a;
                }
            }
        }
        Ok(())
    }

    /// Score of the Bernoulli selection likelihood; zero outside `D`.
    pub fn score(&self, y: f64, x: &[f64], r: bool, alpha: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.score_into(y, x, r, alpha, &mut out)?;
        Ok(out)
    }

    pub fn score_into(&self, y: f64, x: &[f64], r: bool, alpha: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|o| *o = 0.0);
        if !self.support.contains(y) {
            return Ok(());
        }
        let pi = self.prob(y, x, alpha)?;
        if !(pi > 0.0 && pi < 1.0) {
            return Err(Error::Domain(format!("selection probability {pi} at a contributing subject")));
        }
        let rr = if r { 1.0 } else { 0.0 };
        match &self.form {
            SelectionForm::Logistic { terms } => {
                for (o, t) in out.iter_mut().zip(terms) {
                    *o = (rr - pi) * t.value(y, x);
                }
            }
            SelectionForm::Stratified { .. } => {
                let idx = self.cell_index(y, x).expect("inside support");
                out[idx] = (rr - pi) / (pi * (1.0 - pi));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tails() -> SelectionModel {
        SelectionModel::stratified(vec![Interval::below(-0.63), Interval::above(2.63)], None).unwrap()
    }

    #[test]
    fn logistic_probability_reference() {
        let m = SelectionModel::logistic(vec![SelectionTerm::Intercept, SelectionTerm::Y]);
        let p = m.prob(1.0, &[], &[-3.5, 2.3]).unwrap();
        assert!((p - expit(-1.2)).abs() < 1e-15);
        assert!((p - 0.231475).abs() < 1e-6);
    }

    #[test]
    fn stratified_probabilities() {
        let m = two_tails();
        assert_eq!(m.prob(3.0, &[], &[0.3, 0.5]).unwrap(), 0.5);
        assert_eq!(m.prob(0.0, &[], &[0.3, 0.5]).unwrap(), 0.0);
        assert!(matches!(m.prob(-1.0, &[], &[1.3, 0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn selection_scores_reference() {
        let m = SelectionModel::logistic(vec![SelectionTerm::Intercept, SelectionTerm::Y]);
        assert_eq!(m.score(1.0, &[], true, &[-1.0, 1.0]).unwrap(), vec![0.5, 0.5]);
        let s = two_tails().score(-1.0, &[], false, &[0.3, 0.5]).unwrap();
        assert!((s[0] + 1.0 / 0.7).abs() < 1e-14);
        assert_eq!(s[1], 0.0);
        assert_eq!(two_tails().score(0.0, &[], false, &[0.3, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn post_stratified_cells() {
        let cells = XCells::from_cuts(0, &[-0.44, 0.44]).unwrap();
        let m = SelectionModel::stratified(vec![Interval::below(-0.63), Interval::above(2.63)], Some(cells)).unwrap();
        assert_eq!(m.dim(), 6);
        assert_eq!(m.cell_index(3.0, &[0.0]), Some(4));
        assert_eq!(m.cell_index(-3.0, &[-2.0]), Some(0));
        assert_eq!(m.cell_index(1.0, &[-2.0]), None);
    }
}
