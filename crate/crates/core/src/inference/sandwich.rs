//! Sandwich covariance for stacked estimating functions.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::linalg::{inverse, numerical_rank, psd_inverse};
use crate::numerics::Conditioning;

#[derive(Debug, Clone)]
pub struct Covariance {
    /// Covariance of `η̂` (already divided by the sample size).
    pub cov: DMatrix<f64>,
    /// Condition number of the bread `ḠᵀΩ⁻¹Ḡ`.
    pub cond: f64,
    pub conditioning: Conditioning,
}

impl Covariance {
    pub fn se(&self) -> Vec<f64> {
        (0..self.cov.nrows()).map(|i| self.cov[(i, i)].max(0.0).sqrt()).collect()
    }

    pub fn block(&self, range: std::ops::Range<usize>) -> DMatrix<f64> {
        let k = range.len();
        self.cov.view((range.start, range.start), (k, k)).into_owned()
    }
}

/// `Ω = (1/N) Σ g_i g_iᵀ`.
pub fn outer_mean(g: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows().max(1) as f64;
    g.transpose() * g / n
}

/// `[Ḡᵀ Ω⁻¹ Ḡ]⁻¹ / N` with `Ω` the mean outer product of the rows of `g`
/// (`N × q`) and `gbar` the mean Jacobian (`q × p`).
pub fn sandwich_variance(g: &DMatrix<f64>, gbar: &DMatrix<f64>) -> Result<Covariance> {
    if g.ncols() != gbar.nrows() {
        return Err(Error::Input(format!(
            "sandwich: {} constraint columns vs Jacobian with {} rows",
            g.ncols(),
            gbar.nrows()
        )));
    }
    let n = g.nrows() as f64;
    let omega = outer_mean(g);
    let oinv = psd_inverse(&omega).map_err(|_| Error::RankDeficient {
        rank: numerical_rank(&omega, 1e-10),
        dim: omega.nrows(),
        advice: "the constraint covariance is singular".into(),
    })?;
    let bread = gbar.transpose() * &oinv.inv * gbar;
    let binv = psd_inverse(&bread).map_err(|_| Error::Singular("sandwich bread".into()))?;
    let worst = if binv.cond > oinv.cond { binv.cond } else { oinv.cond };
    Ok(Covariance { cov: binv.inv / n, cond: worst, conditioning: Conditioning::classify(worst) })
}

/// `A⁻¹ B A⁻ᵀ / N` for a just-identified system with Jacobian `A` and
/// meat `B = (1/N) Σ U_i U_iᵀ`.
pub fn just_identified_variance(u: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Covariance> {
    let n = u.nrows() as f64;
    let ainv = inverse(a)?;
    let meat = outer_mean(u);
    let cov = &ainv.inv * meat * ainv.inv.transpose() / n;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(Covariance { cov, cond: ainv.cond, conditioning: ainv.conditioning })
}

/// One estimated nuisance parameter plugged into a phase-2 constraint set.
pub struct PluginTerm<'a> {
    /// `∂ḡ/∂ν` with `ḡ` the phase-2 mean constraint (`q × a`).
    pub g_deriv: &'a DMatrix<f64>,
    /// Mean derivative of the nuisance estimating function over phase 1 (`a × a`).
    pub psi_deriv: &'a DMatrix<f64>,
    /// Nuisance estimating function per phase-1 subject (`n × a`).
    pub psi: &'a DMatrix<f64>,
}

/// Covariance of `β̂` from an over-identified phase-2 system `g` (rows for the
/// phase-2 subjects `subjects` out of `n`), accounting for plugged-in
/// nuisance estimates through their influence functions.
pub fn plugin_variance(
    g: &DMatrix<f64>,
    g_beta: &DMatrix<f64>,
    subjects: &[usize],
    n: usize,
    plugins: &[PluginTerm<'_>],
) -> Result<Covariance> {
    let m = g.nrows();
    let omega = outer_mean(g);
    let oinv = psd_inverse(&omega)?;
    let bread = g_beta.transpose() * &oinv.inv * g_beta;
    let binv = psd_inverse(&bread)?;
    let k = &binv.inv * g_beta.transpose() * &oinv.inv;
    let q = g.ncols();
    let scale = n as f64 / m as f64;
    // per-subject contribution to the perturbed mean constraint
    let mut contrib = DMatrix::zeros(n, q);
    for (row, &i) in subjects.iter().enumerate() {
        for c in 0..q {
            contrib[(i, c)] = scale * g[(row, c)];
        }
    }
    for t in plugins {
        let hinv = inverse(t.psi_deriv)?;
        let adj = t.g_deriv * hinv.inv; // q × a
        contrib -= t.psi * adj.transpose();
    }
    let psi = contrib * k.transpose(); // n × k
    let nf = n as f64;
    let cov = psi.transpose() * &psi / (nf * nf);
    let cond = binv.cond.max(oinv.cond);
    Ok(Covariance { cov, cond, conditioning: Conditioning::classify(cond) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_rows_leaves_sandwich_unchanged() {
        let g = DMatrix::from_row_slice(5, 2, &[1.0, 0.2, -0.5, 0.3, 0.7, -1.1, -0.9, 0.4, -0.3, 0.2]);
        let gbar = DMatrix::from_row_slice(2, 1, &[1.5, -0.4]);
        let a = sandwich_variance(&g, &gbar).unwrap();
        let b = sandwich_variance(&(&g * 3.0), &(&gbar * 3.0)).unwrap();
        assert!((a.cov[(0, 0)] - b.cov[(0, 0)]).abs() < 1e-14 * a.cov[(0, 0)].abs());
    }

    #[test]
    fn just_identified_matches_general_form() {
        let u = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, -0.2, 0.3, -0.6, -0.9, 0.1, 0.4]);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, -0.1, 1.2]);
        let ji = just_identified_variance(&u, &a).unwrap();
        let gen = sandwich_variance(&u, &a).unwrap();
        assert!((ji.cov - gen.cov).amax() < 1e-12);
    }
}
