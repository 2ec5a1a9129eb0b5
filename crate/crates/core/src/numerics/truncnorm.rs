//! Partial moments of a normal variable restricted to an interval.

use super::normal::{interval_mass, pdf};
use super::quadrature::Interval;
use crate::error::{Error, Result};

/// Smallest normalizing mass treated as non-degenerate.
pub const MIN_MASS: f64 = 1e-300;

/// `E[Y^k · I(Y ∈ I)]` for k = 0..=3 with `Y ~ N(mu, sigma²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncMoments {
    pub mass: f64,
    pub m1: f64,
    pub m2: f64,
    /// Only filled when `order == 3` was requested, otherwise NaN.
    pub m3: f64,
}

impl TruncMoments {
    /// Mean of the truncated law.
    pub fn conditional_mean(&self) -> f64 {
        self.m1 / self.mass
    }
}

/// Standardized partial moments `∫_a^b t^k φ(t) dt`, k = 0..=3.
///
/// Uses the recursion `M_k = (k−1) M_{k−2} + a^{k−1}φ(a) − b^{k−1}φ(b)`.
pub(crate) fn standard_partial_moments(a: f64, b: f64) -> [f64; 4] {
    let fa = pdf(a);
    let fb = pdf(b);
    // t^j φ(t) → 0 at infinite endpoints
    let tp = |t: f64, f: f64, j: i32| if t.is_infinite() { 0.0 } else { t.powi(j) * f };
    let m0 = interval_mass(a, b);
    let m1 = fa - fb;
    let m2 = m0 + tp(a, fa, 1) - tp(b, fb, 1);
    let m3 = 2.0 * m1 + tp(a, fa, 2) - tp(b, fb, 2);
    [m0, m1, m2, m3]
}

/// Mass and raw partial moments of `N(mu, sigma²)` over `interval`.
///
/// `order` may be 0..=3; higher requested orders are an input error.
pub fn truncated_normal_moments(mu: f64, sigma: f64, interval: Interval, order: usize) -> Result<TruncMoments> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    if order > 3 {
        return Err(Error::Input(format!("moment order {order} > 3")));
    }
    let a = (interval.lo - mu) / sigma;
    let b = (interval.hi - mu) / sigma;
    let m = standard_partial_moments(a, b);
    if m[0] < MIN_MASS {
        return Err(Error::DegenerateConditioning { mass: m[0], x: vec![mu, sigma] });
    }
    let (s, s2, s3) = (sigma, sigma * sigma, sigma * sigma * sigma);
    let mass = m[0];
    let m1 = mu * m[0] + s * m[1];
    let m2 = mu * mu * m[0] + 2.0 * mu * s * m[1] + s2 * m[2];
    let m3 = if order >= 3 {
        mu.powi(3) * m[0] + 3.0 * mu * mu * s * m[1] + 3.0 * mu * s2 * m[2] + s3 * m[3]
    } else {
        f64::NAN
    };
    Ok(TruncMoments { mass, m1, m2, m3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_tail_at_minus_063() {
        let m = truncated_normal_moments(0.0, 1.0, Interval::new(f64::NEG_INFINITY, -0.63), 2).unwrap();
        assert!((m.mass - 0.26435).abs() < 5e-5);
        assert!((m.m1 + pdf(0.63)).abs() < 1e-15);
        assert!((m.conditional_mean() + 1.2375).abs() < 5e-4);
    }

    #[test]
    fn untruncated_moments() {
        let (mu, s) = (1.7, 0.6);
        let m = truncated_normal_moments(mu, s, Interval::real_line(), 3).unwrap();
        assert!((m.mass - 1.0).abs() < 1e-15);
        assert!((m.m1 - mu).abs() < 1e-14);
        assert!((m.m2 - (mu * mu + s * s)).abs() < 1e-13);
        assert!((m.m3 - (mu.powi(3) + 3.0 * mu * s * s)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_interval_centres_first_moment() {
        let (mu, s) = (-0.4, 2.0);
        let m = truncated_normal_moments(mu, s, Interval::new(mu - 1.1, mu + 1.1), 1).unwrap();
        assert!((m.m1 - mu * m.mass).abs() < 1e-14);
    }

    #[test]
    fn degenerate_mass_is_an_error() {
        let e = truncated_normal_moments(0.0, 1.0, Interval::new(40.0, 41.0), 2);
        assert!(matches!(e, Err(Error::DegenerateConditioning { .. })));
        assert!(truncated_normal_moments(0.0, 0.0, Interval::real_line(), 1).is_err());
    }
}
