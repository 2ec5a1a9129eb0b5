use crate::error::{Error, Result};
use crate::numerics::Support;

/// One phase-1 subject.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub y: f64,
    pub x: Vec<f64>,
    /// Expensive covariates; always present when `r` is set.
    pub z: Option<Vec<f64>>,
    /// Selected into phase 2.
    pub r: bool,
    /// `y` lies in the positive-selection support.
    pub s: bool,
}

impl ObservationRecord {
    pub fn new(y: f64, x: Vec<f64>, z: Option<Vec<f64>>, r: bool, support: &Support) -> Result<Self> {
        if !y.is_finite() {
            return Err(Error::Input(format!("non-finite outcome {y}")));
        }
        let s = support.contains(y);
        if r && !s {
            return Err(Error::Input(format!("selected subject has y = {y} outside the positive-selection support")));
        }
        if r && z.is_none() {
            return Err(Error::Input("selected subject is missing z".into()));
        }
        Ok(ObservationRecord { y, x, z, r, s })
    }

    /// Expensive covariates of a phase-2 subject.
    pub fn z_required(&self) -> Result<&[f64]> {
        self.z.as_deref().ok_or_else(|| Error::Input("z is required for this subject but missing".into()))
    }
}

/// Phase-1 sample with phase-2 indicators and column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<ObservationRecord>,
    pub y_name: String,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        records: Vec<ObservationRecord>,
        y_name: impl Into<String>,
        x_names: Vec<String>,
        z_names: Vec<String>,
    ) -> Result<Self> {
        for (i, rec) in records.iter().enumerate() {
            if rec.x.len() != x_names.len() {
                return Err(Error::Data {
                    row: i,
                    column: "x".into(),
                    message: format!("expected {} covariates, found {}", x_names.len(), rec.x.len()),
                });
            }
            if let Some(z) = &rec.z {
                if z.len() != z_names.len() {
                    return Err(Error::Data {
                        row: i,
                        column: "z".into(),
                        message: format!("expected {} covariates, found {}", z_names.len(), z.len()),
                    });
                }
            }
        }
        Ok(Dataset { records, y_name: y_name.into(), x_names, z_names })
    }

    pub fn n(&self) -> usize {
        self.records.len()
    }

    /// Number of phase-2 subjects.
    pub fn m(&self) -> usize {
        self.records.iter().filter(|r| r.r).count()
    }

    pub fn phase2(&self) -> impl Iterator<Item = &ObservationRecord> {
        self.records.iter().filter(|r| r.r)
    }

    /// Recompute `s` against a new support, validating `r ⇒ s`.
    pub fn with_support(&self, support: &Support) -> Result<Dataset> {
        let mut out = self.clone();
        for (i, rec) in out.records.iter_mut().enumerate() {
            rec.s = support.contains(rec.y);
            if rec.r && !rec.s {
                return Err(Error::Data {
                    row: i,
                    column: self.y_name.clone(),
                    message: format!("selected subject has y = {} outside the support", rec.y),
                });
            }
        }
        Ok(out)
    }

    pub fn x_index(&self, name: &str) -> Option<usize> {
        self.x_names.iter().position(|n| n == name)
    }

    pub fn z_index(&self, name: &str) -> Option<usize> {
        self.z_names.iter().position(|n| n == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Interval;

    #[test]
    fn selection_requires_support_and_z() {
        let d = Support::new(vec![Interval::below(0.0), Interval::above(1.0)]).unwrap();
        assert!(ObservationRecord::new(0.5, vec![], Some(vec![1.0]), true, &d).is_err());
        assert!(ObservationRecord::new(2.0, vec![], None, true, &d).is_err());
        let rec = ObservationRecord::new(0.5, vec![], None, false, &d).unwrap();
        assert!(!rec.s);
        let rec = ObservationRecord::new(-3.0, vec![], Some(vec![0.1]), true, &d).unwrap();
        assert!(rec.s && rec.r);
    }
}
