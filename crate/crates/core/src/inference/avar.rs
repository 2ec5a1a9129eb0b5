//! Population moment blocks and the closed-form asymptotic variances built from them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::constraints::{ConstraintConfig, ConstraintEngine, ParamMode, Variant};
use crate::error::{Error, Result};
use crate::model::{cond_score_beta, Dataset, ModelSpec};
use crate::numerics::linalg::psd_inverse;

/// Sample-mean estimates of the moment matrices, all averaged over the `n`
/// phase-1 subjects. With a proper support `u` means `v` and the blocks are
/// the tilde versions.
#[derive(Debug, Clone)]
pub struct MomentBlocks {
    /// `E{R s_cβ s_cβᵀ}` (`k × k`).
    pub s: DMatrix<f64>,
    /// `E{R ∂uᵀ/∂β}` (`k × q`).
    pub j: DMatrix<f64>,
    /// `E{R u uᵀ}` (`q × q`).
    pub omega: DMatrix<f64>,
    /// `E{R s_cβ hᵀ}` (`k × q`).
    pub u: DMatrix<f64>,
    /// `E{R u hᵀ}` (`q × q`).
    pub v: DMatrix<f64>,
    /// `E{h hᵀ}` (`q × q`).
    pub w: DMatrix<f64>,
    /// `E{R ∂u/∂θᵀ}` (`q × q`).
    pub h: DMatrix<f64>,
    /// `E{s_cβ hᵀ}` over every subject with `y ∈ D`, using latent `z` (`k × q`).
    pub c: DMatrix<f64>,
    /// `E{R s_cβ uᵀ}` (`k × q`).
    pub s_u_cross: DMatrix<f64>,
    /// Monte Carlo standard errors of the entries of `J − C`.
    pub j_minus_c_se: DMatrix<f64>,
    /// Monte Carlo standard errors of the entries of `s_u_cross`.
    pub s_u_cross_se: DMatrix<f64>,
    pub n: usize,
}

fn mean_and_se(samples: &[DMatrix<f64>], rows: usize, cols: usize, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let nf = n as f64;
    let mut sum = DMatrix::zeros(rows, cols);
    let mut sq = DMatrix::zeros(rows, cols);
    for s in samples {
        sum += s;
        sq += s.component_mul(s);
    }
    let mean = &sum / nf;
    let var = (&sq / nf - mean.component_mul(&mean)) * (nf / (nf - 1.0).max(1.0));
    (mean, var.map(|v| (v.max(0.0) / nf).sqrt()))
}

/// Moment blocks at `(β, α, θ)` from a dataset whose records all carry `z`
/// (latent for `r = 0`), as produced by a simulator.
pub fn estimate_moment_blocks(
    data: &Dataset,
    spec: &ModelSpec,
    beta: &[f64],
    alpha: &[f64],
    theta: &[f64],
) -> Result<MomentBlocks> {
    let n = data.n();
    let k = spec.outcome.dim();
    let q = spec.working.dim();
    let config = |theta: &[f64]| ConstraintConfig {
        variant: Variant::PiTheta2,
        zero_prob: spec.has_proper_support(),
        alpha: ParamMode::Fixed(alpha.to_vec()),
        theta: ParamMode::Fixed(theta.to_vec()),
    };
    let engine = ConstraintEngine::new(spec, data, config(theta))?;
    let ev = engine.eval(beta)?;
    let dg = engine.jacobians(beta)?;
    let ucols = k..k + q;

    // ∂u/∂θ by central differences over fixed-θ engines
    let step = crate::numerics::StepRule::default();
    let mut du_dtheta = Vec::with_capacity(q);
    for a in 0..q {
        let hh = step.step(theta[a]);
        let mut tp = theta.to_vec();
        tp[a] += hh;
        let plus = ConstraintEngine::new(spec, data, config(&tp))?.eval(beta)?.g.columns(k, q).into_owned();
        tp[a] = theta[a] - hh;
        let minus = ConstraintEngine::new(spec, data, config(&tp))?.eval(beta)?.g.columns(k, q).into_owned();
        du_dtheta.push((plus - minus) / (2.0 * hh));
    }

    let mut s = DMatrix::zeros(k, k);
    let mut j = DMatrix::zeros(k, q);
    let mut omega = DMatrix::zeros(q, q);
    let mut ublk = DMatrix::zeros(k, q);
    let mut v = DMatrix::zeros(q, q);
    let mut w = DMatrix::zeros(q, q);
    let mut hblk = DMatrix::zeros(q, q);
    let mut diff_samples = Vec::with_capacity(n);
    let mut cross_samples = Vec::with_capacity(n);
    let mut c = DMatrix::zeros(k, q);

    let mut row_of = vec![usize::MAX; n];
    for (row, &i) in engine.subjects.iter().enumerate() {
        row_of[i] = row;
    }
    for (i, rec) in data.records.iter().enumerate() {
        let hvec = nalgebra::DVector::from_vec(spec.working.score(rec.y, &rec.x, theta));
        w += &hvec * hvec.transpose();
        let mut d_i = DMatrix::zeros(k, q);
        let mut cross_i = DMatrix::zeros(k, q);
        if rec.s {
            if let Some(z) = &rec.z {
                let sc = nalgebra::DVector::from_vec(cond_score_beta(spec, rec.y, &rec.x, z, beta, alpha)?);
                let sh_t = &sc * hvec.transpose();
                c += &sh_t;
                d_i -= &sh_t;
            }
        }
        if rec.r {
            let row = row_of[i];
            let sc = ev.g.row(row).columns(0, k).transpose();
            let uu = ev.g.row(row).columns(ucols.start, q).transpose();
            s += &sc * sc.transpose();
            omega += &uu * uu.transpose();
            ublk += &sc * hvec.transpose();
            v += &uu * hvec.transpose();
            cross_i = &sc * uu.transpose();
            let mut jac = DMatrix::zeros(k, q);
            for b in 0..k {
                for a in 0..q {
                    jac[(b, a)] = dg[b][(row, k + a)];
                }
            }
            j += &jac;
            d_i += &jac;
            for a in 0..q {
                for b in 0..q {
                    hblk[(b, a)] += du_dtheta[a][(row, b)];
                }
            }
        }
        diff_samples.push(d_i);
        cross_samples.push(cross_i);
    }
    let nf = n as f64;
    let (_, j_minus_c_se) = mean_and_se(&diff_samples, k, q, n);
    let (s_u_cross, s_u_cross_se) = mean_and_se(&cross_samples, k, q, n);
    Ok(MomentBlocks {
        s: s / nf,
        j: j / nf,
        omega: omega / nf,
        u: ublk / nf,
        v: v / nf,
        w: w / nf,
        h: hblk / nf,
        c: c / nf,
        s_u_cross,
        j_minus_c_se,
        s_u_cross_se,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvarKind {
    /// `S⁻¹`.
    Cml,
    /// `(S + J Ω⁻¹ Jᵀ)⁻¹`.
    PiThetaStar,
    /// The plug-in `θ̂` variance with blocks `U`, `V`, `W`.
    PiThetaHat,
    /// The zero-probability plug-in variance, which routes `θ̂` through `H W⁻¹`.
    PiThetaHatZero,
}

fn conform(m: &DMatrix<f64>, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::Input(format!("{what} is {}x{}, expected {rows}x{cols}", m.nrows(), m.ncols())));
    }
    Ok(())
}

/// Evaluate a closed-form asymptotic variance of `√n(β̂ − β₀)`.
pub fn closed_form_avar(kind: AvarKind, b: &MomentBlocks) -> Result<DMatrix<f64>> {
    let k = b.s.nrows();
    let q = b.omega.nrows();
    conform(&b.s, k, k, "S")?;
    if kind == AvarKind::Cml {
        return Ok(psd_inverse(&b.s)?.inv);
    }
    conform(&b.j, k, q, "J")?;
    conform(&b.omega, q, q, "Omega")?;
    let oinv = psd_inverse(&b.omega)?.inv;
    let a = &b.s + &b.j * &oinv * b.j.transpose();
    let ainv = psd_inverse(&a)?.inv;
    match kind {
        AvarKind::Cml => unreachable!(),
        AvarKind::PiThetaStar => Ok(ainv),
        AvarKind::PiThetaHat => {
            conform(&b.u, k, q, "U")?;
            conform(&b.v, q, q, "V")?;
            conform(&b.w, q, q, "W")?;
            let jo = &b.j * &oinv;
            let mid = &b.omega - &b.v - b.v.transpose() + &b.w;
            let m = &b.s + &jo * b.u.transpose() + &b.u * jo.transpose() + &jo * mid * jo.transpose();
            Ok(&ainv * m * &ainv)
        }
        AvarKind::PiThetaHatZero => {
            conform(&b.u, k, q, "U")?;
            conform(&b.v, q, q, "V")?;
            conform(&b.w, q, q, "W")?;
            conform(&b.h, q, q, "H")?;
            let winv = psd_inverse(&b.w)?.inv;
            let hw = &b.h * &winv;
            let jo = &b.j * &oinv;
            let cross = &jo * &hw * b.u.transpose();
            let mid = &b.omega - &hw * b.v.transpose() - &b.v * hw.transpose() + &hw * b.h.transpose();
            let m = &b.s + &cross + cross.transpose() + &jo * mid * jo.transpose();
            Ok(&ainv * m * &ainv)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blocks(j_scale: f64) -> MomentBlocks {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let omega = DMatrix::from_row_slice(2, 2, &[1.5, -0.2, -0.2, 0.8]);
        let j = DMatrix::from_row_slice(2, 2, &[0.4, 0.1, -0.3, 0.6]) * j_scale;
        let z = DMatrix::zeros(2, 2);
        MomentBlocks {
            s,
            j,
            omega: omega.clone(),
            u: z.clone(),
            v: z.clone(),
            w: omega,
            h: z.clone(),
            c: z.clone(),
            s_u_cross: z.clone(),
            j_minus_c_se: z.clone(),
            s_u_cross_se: z,
            n: 1,
        }
    }

    #[test]
    fn zero_j_gives_cml_variance() {
        let b = blocks(0.0);
        let a = closed_form_avar(AvarKind::PiThetaStar, &b).unwrap();
        let c = closed_form_avar(AvarKind::Cml, &b).unwrap();
        assert!((a - c).amax() < 1e-14);
    }

    #[test]
    fn plug_in_with_zero_cross_blocks() {
        let b = blocks(1.0);
        let got = closed_form_avar(AvarKind::PiThetaHat, &b).unwrap();
        let oinv = b.omega.clone().try_inverse().unwrap();
        let a = &b.s + &b.j * &oinv * b.j.transpose();
        let ainv = a.try_inverse().unwrap();
        let m = &b.s + &b.j * &oinv * b.j.transpose() * 2.0;
        let expected = &ainv * m * &ainv;
        assert!((got - expected).amax() < 1e-12);
    }

    #[test]
    fn phase_one_information_never_hurts() {
        let b = blocks(1.0);
        let diff = closed_form_avar(AvarKind::Cml, &b).unwrap() - closed_form_avar(AvarKind::PiThetaStar, &b).unwrap();
        let ev = diff.symmetric_eigenvalues();
        assert!(ev.iter().all(|&e| e >= -1e-12));
    }
}
