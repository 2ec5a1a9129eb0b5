use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::schema::{DatasetSchema, Transform};
use crate::error::{Error, Result};
use crate::estimators::{Coefficient, FitResult};
use crate::model::{Dataset, OutcomeModel};
use crate::numerics::Support;

/// One fitted transformation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    Log,
    Center { mean: f64 },
    Scale { mean: f64, sd: f64 },
}

impl Step {
    pub fn forward(&self, v: f64) -> f64 {
        match *self {
            Step::Log => v.ln(),
            Step::Center { mean } => v - mean,
            Step::Scale { mean, sd } => (v - mean) / sd,
        }
    }

    pub fn inverse(&self, v: f64) -> f64 {
        match *self {
            Step::Log => v.exp(),
            Step::Center { mean } => v + mean,
            Step::Scale { mean, sd } => v * sd + mean,
        }
    }

    /// `(shift, scale)` with `forward(v) = (v − shift) / scale` for affine steps.
    fn affine(&self) -> Option<(f64, f64)> {
        match *self {
            Step::Log => None,
            Step::Center { mean } => Some((mean, 1.0)),
            Step::Scale { mean, sd } => Some((mean, sd)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnTransform {
    pub column: String,
    pub steps: Vec<Step>,
}

impl ColumnTransform {
    pub fn forward(&self, v: f64) -> f64 {
        self.steps.iter().fold(v, |acc, s| s.forward(acc))
    }

    pub fn inverse(&self, v: f64) -> f64 {
        self.steps.iter().rev().fold(v, |acc, s| s.inverse(acc))
    }

    /// The trailing standardization as `(shift, scale)`, on the scale after any log.
    pub fn standardization(&self) -> (f64, f64) {
        self.steps.last().and_then(Step::affine).unwrap_or((0.0, 1.0))
    }
}

/// Means and standard deviations used by [`apply_transforms`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransformRecord {
    pub columns: Vec<ColumnTransform>,
    /// Outcome strata cut points on the analysis scale.
    #[serde(default)]
    pub strata_cuts: Option<[f64; 2]>,
}

impl TransformRecord {
    pub fn column(&self, name: &str) -> Option<&ColumnTransform> {
        self.columns.iter().find(|c| c.column == name)
    }

    pub fn is_identity(&self) -> bool {
        self.columns.iter().all(|c| c.steps.is_empty())
    }

    /// Undo every recorded transformation.
    pub fn invert(&self, data: &Dataset) -> Dataset {
        let mut out = data.clone();
        let y = self.column(&data.y_name);
        let xs: Vec<_> = data.x_names.iter().map(|n| self.column(n)).collect();
        let zs: Vec<_> = data.z_names.iter().map(|n| self.column(n)).collect();
        for rec in out.records.iter_mut() {
            if let Some(t) = y {
                rec.y = t.inverse(rec.y);
            }
            for (v, t) in rec.x.iter_mut().zip(&xs) {
                if let Some(t) = t {
                    *v = t.inverse(*v);
                }
            }
            if let Some(z) = rec.z.as_mut() {
                for (v, t) in z.iter_mut().zip(&zs) {
                    if let Some(t) = t {
                        *v = t.inverse(*v);
                    }
                }
            }
        }
        out
    }

    /// Coefficients with the standardizations undone (logs are kept), with
    /// their covariance mapped through the same linear change of variables.
    pub fn unstandardized(&self, fit: &FitResult, outcome: &OutcomeModel, data: &Dataset) -> Vec<Coefficient> {
        let k = fit.beta.len();
        let (my, sy) = self.column(&data.y_name).map_or((0.0, 1.0), ColumnTransform::standardization);
        let binary = outcome.family == crate::model::Family::Logistic;
        let (my, sy) = if binary { (0.0, 1.0) } else { (my, sy) };
        let covs: Vec<(f64, f64)> = outcome
            .layout
            .x_cols
            .iter()
            .map(|&c| &data.x_names[c])
            .chain(outcome.layout.z_cols.iter().map(|&c| &data.z_names[c]))
            .map(|n| self.column(n).map_or((0.0, 1.0), ColumnTransform::standardization))
            .collect();
        let mut a = DMatrix::zeros(k, k);
        let mut shift = vec![0.0; k];
        a[(0, 0)] = sy;
        shift[0] = my;
        for (j, (m, s)) in covs.iter().enumerate() {
            a[(j + 1, j + 1)] = sy / s;
            a[(0, j + 1)] = -sy * m / s;
        }
        let var_idx = (!binary).then_some(k - 1);
        if let Some(v) = var_idx {
            a[(v, v)] = sy * sy;
        }
        let b = nalgebra::DVector::from_column_slice(&fit.beta);
        let est = &a * b;
        let cov = &a * fit.beta_cov_matrix() * a.transpose();
        fit.beta_names
            .iter()
            .enumerate()
            .map(|(j, name)| {
                let e = est[j] + shift[j];
                let se = cov[(j, j)].max(0.0).sqrt();
                if Some(j) == var_idx {
                    let s = e.max(0.0).sqrt();
                    Coefficient { name: "sigma".into(), estimate: s, se: se / (2.0 * s) }
                } else {
                    Coefficient { name: name.clone(), estimate: e, se }
                }
            })
            .collect()
    }
}

/// Fit a column's transform chain on `values` (`None` entries are skipped).
fn fit_chain(column: &str, steps: &[Transform], values: &[Option<f64>]) -> Result<ColumnTransform> {
    let mut current: Vec<(usize, f64)> = values.iter().enumerate().filter_map(|(i, v)| v.map(|v| (i, v))).collect();
    let mut fitted = Vec::new();
    for t in steps {
        let step = match t {
            Transform::None => continue,
            Transform::Log => {
                if let Some(&(row, v)) = current.iter().find(|(_, v)| !(*v > 0.0)) {
                    return Err(Error::Data {
                        row: row + 1,
                        column: column.into(),
                        message: format!("log of non-positive value {v}"),
                    });
                }
                Step::Log
            }
            Transform::Standardize | Transform::StandardizeUnitVariance => {
                let n = current.len();
                if n < 2 {
                    return Err(Error::Data {
                        row: 0,
                        column: column.into(),
                        message: "standardization needs at least two values".into(),
                    });
                }
                let mean = current.iter().map(|(_, v)| v).sum::<f64>() / n as f64;
                let var = current.iter().map(|(_, v)| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                let sd = var.sqrt();
                if !(sd > 1e-12 * mean.abs().max(1.0)) {
                    return Err(Error::Data {
                        row: 0,
                        column: column.into(),
                        message: "cannot standardize a constant column (zero standard deviation)".into(),
                    });
                }
                if *t == Transform::Standardize {
                    Step::Center { mean }
                } else {
                    Step::Scale { mean, sd }
                }
            }
        };
        for (_, v) in current.iter_mut() {
            *v = step.forward(*v);
        }
        fitted.push(step);
    }
    Ok(ColumnTransform { column: column.into(), steps: fitted })
}

/// Fitted transform of the outcome column from its raw values.
pub(crate) fn fit_outcome_chain(schema: &DatasetSchema, ys: &[f64]) -> Result<ColumnTransform> {
    let vals: Vec<Option<f64>> = ys.iter().map(|&v| Some(v)).collect();
    fit_chain(&schema.y_column, &schema.steps(&schema.y_column), &vals)
}

/// Apply the schema's transforms; statistics for `z` use the rows where it
/// is observed. The outcome strata are re-resolved on the new scale.
pub fn apply_transforms(data: &Dataset, schema: &DatasetSchema) -> Result<(Dataset, TransformRecord)> {
    schema.validate()?;
    let mut out = data.clone();
    let mut record = TransformRecord::default();

    let ys: Vec<Option<f64>> = data.records.iter().map(|r| Some(r.y)).collect();
    let t = fit_chain(&data.y_name, &schema.steps(&data.y_name), &ys)?;
    for rec in out.records.iter_mut() {
        rec.y = t.forward(rec.y);
    }
    record.columns.push(t);

    for (j, name) in data.x_names.iter().enumerate() {
        let vals: Vec<Option<f64>> = data.records.iter().map(|r| Some(r.x[j])).collect();
        let t = fit_chain(name, &schema.steps(name), &vals)?;
        for rec in out.records.iter_mut() {
            rec.x[j] = t.forward(rec.x[j]);
        }
        record.columns.push(t);
    }
    for (j, name) in data.z_names.iter().enumerate() {
        let vals: Vec<Option<f64>> = data.records.iter().map(|r| r.z.as_ref().map(|z| z[j])).collect();
        let t = fit_chain(name, &schema.steps(name), &vals)?;
        for rec in out.records.iter_mut() {
            if let Some(z) = rec.z.as_mut() {
                z[j] = t.forward(z[j]);
            }
        }
        record.columns.push(t);
    }

    let cuts = match &schema.strata {
        Some(s) => Some(s.resolve(&out.records.iter().map(|r| r.y).collect::<Vec<_>>())?),
        None => None,
    };
    record.strata_cuts = cuts;
    let support: Support = DatasetSchema::support_from_cuts(cuts)?;
    Ok((out.with_support(&support)?, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObservationRecord;

    fn data(ys: &[f64], xs: &[f64]) -> Dataset {
        let d = Support::real_line();
        let recs = ys
            .iter()
            .zip(xs)
            .map(|(&y, &x)| ObservationRecord::new(y, vec![x], Some(vec![x * 2.0]), true, &d).unwrap())
            .collect();
        Dataset::new(recs, "y", vec!["x".into()], vec!["z".into()]).unwrap()
    }

    #[test]
    fn centered_mean_is_zero() {
        let d = data(&[1.0, 2.0, 4.0, 7.5], &[0.3, 0.1, 0.9, 1.4]);
        let mut s = DatasetSchema::new("y", &["x"], &["z"]);
        s.transforms.insert("y".into(), vec![Transform::Standardize]);
        s.transforms.insert("x".into(), vec![Transform::StandardizeUnitVariance]);
        let (t, rec) = apply_transforms(&d, &s).unwrap();
        let my: f64 = t.records.iter().map(|r| r.y).sum::<f64>() / 4.0;
        assert!(my.abs() < 1e-12);
        let xs: Vec<f64> = t.records.iter().map(|r| r.x[0]).collect();
        let var = xs.iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!((var - 1.0).abs() < 1e-12);
        let back = rec.invert(&t);
        for (a, b) in back.records.iter().zip(&d.records) {
            assert!((a.y - b.y).abs() <= 1e-12 * b.y.abs());
            assert!((a.x[0] - b.x[0]).abs() <= 1e-12 * b.x[0].abs());
        }
    }

    #[test]
    fn log_matches_ln() {
        let d = data(&[1.0, 2.0, 4.0], &[22.0, 31.5, 27.25]);
        let mut s = DatasetSchema::new("y", &["x"], &["z"]);
        s.transforms.insert("x".into(), vec![Transform::Log]);
        let (t, _) = apply_transforms(&d, &s).unwrap();
        for (a, b) in t.records.iter().zip(&d.records) {
            assert_eq!(a.x[0], b.x[0].ln());
        }
    }

    #[test]
    fn constant_column_and_non_positive_log_fail() {
        let d = data(&[1.0, 2.0, 4.0], &[3.0, 3.0, 3.0]);
        let mut s = DatasetSchema::new("y", &["x"], &["z"]);
        s.transforms.insert("x".into(), vec![Transform::Standardize]);
        assert!(matches!(apply_transforms(&d, &s), Err(Error::Data { .. })));
        let d = data(&[1.0, -2.0, 4.0], &[3.0, 1.0, 3.0]);
        let mut s = DatasetSchema::new("y", &["x"], &["z"]);
        s.transforms.insert("y".into(), vec![Transform::Log]);
        match apply_transforms(&d, &s) {
            Err(Error::Data { row, column, .. }) => assert_eq!((row, column.as_str()), (2, "y")),
            other => panic!("{other:?}"),
        }
    }
}
