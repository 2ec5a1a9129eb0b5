//! Numerical kernels shared by every other module: Gaussian tail functions,
//! truncated-normal moments, quadrature over the outcome, finite differences,
//! small dense linear algebra and keyed random streams.

pub mod diff;
pub mod linalg;
pub mod normal;
pub mod quadrature;
pub mod rng;
pub mod truncnorm;

pub use diff::{finite_diff_jacobian, StepRule};
pub use linalg::{psd_inverse, solve_linear, Conditioning, Inverted, Solved};
pub use quadrature::{integrate_y, integrate_y_vec, Interval, QuadratureMethod, QuadratureSpec, Support, YLaw, YRule};
pub use rng::{Purpose, StreamKey};
pub use truncnorm::{truncated_normal_moments, TruncMoments};

/// Numerically stable logistic function.
#[inline]
pub fn expit(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log(1 + exp(t))` without overflow.
#[inline]
pub fn softplus(t: f64) -> f64 {
    if t > 30.0 {
        t + (-t).exp()
    } else if t < -30.0 {
        t.exp()
    } else {
        t.exp().ln_1p()
    }
}

/// Largest absolute entry; 0 for an empty slice.
pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expit_symmetry_and_tails() {
        assert_eq!(expit(0.0), 0.5);
        assert!((expit(3.0) + expit(-3.0) - 1.0).abs() < 1e-15);
        assert!(expit(-800.0) >= 0.0 && expit(800.0) <= 1.0);
        assert!((logit(expit(1.3)) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn softplus_matches_naive_in_range() {
        for t in [-20.0, -1.0, 0.0, 2.5, 20.0] {
            let naive = (1.0 + f64::exp(t)).ln();
            assert!((softplus(t) - naive).abs() < 1e-12);
        }
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-12);
    }
}
