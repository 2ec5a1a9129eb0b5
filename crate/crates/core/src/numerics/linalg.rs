//! Small dense solves and inverses with condition diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Above this 2-norm condition number results are flagged as imprecise.
pub const POOR_CONDITION: f64 = 1e7;
/// Above this the answer is unlikely to carry any correct digits.
pub const SEVERE_CONDITION: f64 = 1e12;
/// Relative singular-value floor below which a matrix counts as singular.
const SINGULAR_RTOL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    Good,
    Poor,
    Severe,
}

impl Conditioning {
    pub fn classify(cond: f64) -> Self {
        if !(cond <= SEVERE_CONDITION) {
            Conditioning::Severe
        } else if cond > POOR_CONDITION {
            Conditioning::Poor
        } else {
            Conditioning::Good
        }
    }

    pub fn is_warning(&self) -> bool {
        !matches!(self, Conditioning::Good)
    }
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub x: DVector<f64>,
    pub cond: f64,
    pub conditioning: Conditioning,
}

#[derive(Debug, Clone)]
pub struct Inverted {
    pub inv: DMatrix<f64>,
    pub cond: f64,
    pub conditioning: Conditioning,
}

/// 2-norm condition number from the singular values; `inf` when singular.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    if max == 0.0 || min <= SINGULAR_RTOL * max {
        f64::INFINITY
    } else {
        max / min
    }
}

fn check_square(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Input(format!("{what}: {}x{} matrix is not square", a.nrows(), a.ncols())));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric { what: "non-finite matrix entry".into(), location: what.into() });
    }
    Ok(())
}

/// Solve `A x = b` by LU with partial pivoting.
pub fn solve_linear(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Solved> {
    check_square(a, "solve_linear")?;
    if a.nrows() != b.len() {
        return Err(Error::Input(format!("solve_linear: {} rows vs rhs length {}", a.nrows(), b.len())));
    }
    let cond = condition_number(a);
    if !cond.is_finite() {
        return Err(Error::Singular(format!("{}x{} system", a.nrows(), a.ncols())));
    }
    let x = a.clone().lu().solve(b).ok_or_else(|| Error::Singular(format!("{}x{} system", a.nrows(), a.ncols())))?;
    Ok(Solved { x, cond, conditioning: Conditioning::classify(cond) })
}

/// Inverse of a symmetric positive (semi)definite matrix, symmetrized.
///
/// Uses Cholesky when it succeeds and falls back to LU otherwise, so a
/// symmetric but indefinite input still inverts.
pub fn psd_inverse(a: &DMatrix<f64>) -> Result<Inverted> {
    check_square(a, "psd_inverse")?;
    let cond = condition_number(a);
    if !cond.is_finite() {
        return Err(Error::Singular(format!("{}x{} matrix", a.nrows(), a.ncols())));
    }
    let sym = (a + a.transpose()) * 0.5;
    let inv = match sym.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => sym.try_inverse().ok_or_else(|| Error::Singular(format!("{}x{} matrix", a.nrows(), a.ncols())))?,
    };
    let inv = (&inv + inv.transpose()) * 0.5;
    Ok(Inverted { inv, cond, conditioning: Conditioning::classify(cond) })
}

/// General inverse via LU.
pub fn inverse(a: &DMatrix<f64>) -> Result<Inverted> {
    check_square(a, "inverse")?;
    let cond = condition_number(a);
    if !cond.is_finite() {
        return Err(Error::Singular(format!("{}x{} matrix", a.nrows(), a.ncols())));
    }
    let inv = a.clone().try_inverse().ok_or_else(|| Error::Singular(format!("{}x{} matrix", a.nrows(), a.ncols())))?;
    Ok(Inverted { inv, cond, conditioning: Conditioning::classify(cond) })
}

/// Numerical rank with tolerance `rtol · σ_max`.
pub fn numerical_rank(a: &DMatrix<f64>, rtol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().singular_values();
    let max = sv.max();
    sv.iter().filter(|&&s| s > rtol * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hilbert(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| 1.0 / (i + j + 1) as f64)
    }

    #[test]
    fn solves_well_conditioned_system() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        let s = solve_linear(&a, &b).unwrap();
        assert!((s.x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((s.x[1] - 7.0 / 11.0).abs() < 1e-14);
        assert_eq!(s.conditioning, Conditioning::Good);
    }

    #[test]
    fn singular_matrix_is_an_error() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(psd_inverse(&a), Err(Error::Singular(_))));
        assert!(matches!(solve_linear(&a, &DVector::zeros(2)), Err(Error::Singular(_))));
    }

    #[test]
    fn hilbert_six_is_flagged() {
        let h = hilbert(6);
        let inv = psd_inverse(&h).unwrap();
        assert!(inv.cond > 1e7);
        assert!(inv.conditioning.is_warning());
        let id = &h * &inv.inv;
        assert!((id - DMatrix::identity(6, 6)).abs().max() < 1e-6);
    }

    #[test]
    fn rank_of_duplicated_column() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert_eq!(numerical_rank(&a, 1e-10), 1);
    }
}
