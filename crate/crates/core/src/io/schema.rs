use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Interval, Support};

/// Column transformation; a column may carry several, applied log first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    None,
    Log,
    /// Subtract the mean.
    Standardize,
    /// Subtract the mean and divide by the sample standard deviation.
    StandardizeUnitVariance,
}

/// Positive-selection set `D` as two outcome tails, `(−∞, c₁] ∪ (c₂, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strata {
    /// Cut points on the analysis (transformed) scale.
    Cuts([f64; 2]),
    /// Empirical quantile levels of the phase-1 outcome.
    Quantiles([f64; 2]),
}

impl Strata {
    /// Cut points for outcome values `ys` on the scale they are given in.
    pub fn resolve(&self, ys: &[f64]) -> Result<[f64; 2]> {
        let c = match self {
            Strata::Cuts(c) => *c,
            Strata::Quantiles([a, b]) => {
                if !(0.0 < *a && a < b && *b < 1.0) {
                    return Err(Error::Config(format!("strata quantiles {a}, {b} must satisfy 0 < q1 < q2 < 1")));
                }
                let mut sorted = ys.to_vec();
                sorted.sort_by(f64::total_cmp);
                [quantile_sorted(&sorted, *a), quantile_sorted(&sorted, *b)]
            }
        };
        if !(c[0] < c[1]) {
            return Err(Error::Config(format!("strata cut points {} and {} must increase", c[0], c[1])));
        }
        Ok(c)
    }

    pub fn tails(cuts: [f64; 2]) -> Vec<Interval> {
        vec![Interval::below(cuts[0]), Interval::above(cuts[1])]
    }
}

/// Linear-interpolation sample quantile (type 7) of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Columns of an input CSV and how to prepare them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub y_column: String,
    #[serde(default)]
    pub x_columns: Vec<String>,
    #[serde(default)]
    pub z_columns: Vec<String>,
    /// Phase-2 indicator (`0`/`1`); absent means every row is complete.
    #[serde(default)]
    pub r_column: Option<String>,
    #[serde(default)]
    pub transforms: BTreeMap<String, Vec<Transform>>,
    /// Absent means `D` is the whole line.
    #[serde(default)]
    pub strata: Option<Strata>,
}

impl DatasetSchema {
    pub fn new(y_column: &str, x_columns: &[&str], z_columns: &[&str]) -> Self {
        DatasetSchema {
            y_column: y_column.into(),
            x_columns: x_columns.iter().map(|s| s.to_string()).collect(),
            z_columns: z_columns.iter().map(|s| s.to_string()).collect(),
            r_column: None,
            transforms: BTreeMap::new(),
            strata: None,
        }
    }

    pub fn columns(&self) -> Vec<&str> {
        let mut out = vec![self.y_column.as_str()];
        out.extend(self.x_columns.iter().map(String::as_str));
        out.extend(self.z_columns.iter().map(String::as_str));
        out.extend(self.r_column.as_deref());
        out
    }

    pub fn validate(&self) -> Result<()> {
        let cols = self.columns();
        let mut seen = BTreeSet::new();
        for c in &cols {
            if c.is_empty() {
                return Err(Error::Config("empty column name in schema".into()));
            }
            if !seen.insert(*c) {
                return Err(Error::Config(format!("column {c:?} appears more than once in the schema")));
            }
        }
        for (col, steps) in &self.transforms {
            if !seen.contains(col.as_str()) || self.r_column.as_deref() == Some(col) {
                return Err(Error::Config(format!("transform for unknown data column {col:?}")));
            }
            let scalings = steps
                .iter()
                .filter(|t| matches!(t, Transform::Standardize | Transform::StandardizeUnitVariance))
                .count();
            if scalings > 1 {
                return Err(Error::Config(format!("column {col:?} has more than one standardization")));
            }
            if steps.iter().filter(|t| **t == Transform::Log).count() > 1 {
                return Err(Error::Config(format!("column {col:?} is log-transformed twice")));
            }
        }
        Ok(())
    }

    /// Transform chain of a column in application order.
    pub fn steps(&self, column: &str) -> Vec<Transform> {
        let mut steps: Vec<Transform> = self
            .transforms
            .get(column)
            .map(|v| v.iter().copied().filter(|t| *t != Transform::None).collect())
            .unwrap_or_default();
        steps.sort_by_key(|t| *t != Transform::Log);
        steps
    }

    pub fn support_from_cuts(cuts: Option<[f64; 2]>) -> Result<Support> {
        match cuts {
            Some(c) => Support::new(Strata::tails(c)),
            None => Ok(Support::real_line()),
        }
    }
}
