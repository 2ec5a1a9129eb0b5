//! Central finite differences.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Step `h_j = rel · max(1, |x_j|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub rel: f64,
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule { rel: 1e-5 }
    }
}

impl StepRule {
    #[inline]
    pub fn step(&self, x: f64) -> f64 {
        self.rel * x.abs().max(1.0)
    }
}

/// Jacobian of `f: R^p -> R^m` at `x`, returned as an `m × p` matrix.
pub fn finite_diff_jacobian<F>(f: F, x: &[f64], rule: StepRule) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let p = x.len();
    let mut xp = x.to_vec();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut m = None;
    for j in 0..p {
        let h = rule.step(x[j]);
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        xp[j] = x[j];
        if fp.len() != fm.len() || m.is_some_and(|m| m != fp.len()) {
            return Err(Error::Numeric {
                what: "function output changed length".into(),
                location: format!("coordinate {j}"),
            });
        }
        m = Some(fp.len());
        let col: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        if let Some(bad) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: "non-finite difference quotient".into(),
                location: format!("output {bad}, coordinate {j}"),
            });
        }
        cols.push(col);
    }
    let m = match m {
        Some(m) => m,
        None => f(x)?.len(),
    };
    Ok(DMatrix::from_fn(m, p, |i, j| cols[j][i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_of_smooth_map() {
        let f = |x: &[f64]| Ok(vec![x[0] * x[1], x[0].sin(), x[1].exp()]);
        let j = finite_diff_jacobian(f, &[0.7, -1.2], StepRule::default()).unwrap();
        let exact = [[-1.2, 0.7], [0.7f64.cos(), 0.0], [0.0, (-1.2f64).exp()]];
        for i in 0..3 {
            for k in 0..2 {
                assert!((j[(i, k)] - exact[i][k]).abs() < 1e-9);
            }
        }
    }
}
