//! Integration over the outcome `Y` against its conditional law.
//!
//! Every expectation in the model layer reduces to a weighted sum over a
//! [`YRule`]: a finite set of nodes whose weights carry the outcome density
//! restricted to the support set. Three constructions are available:
//!
//! * `TwoPointBinary`: exact enumeration of `y ∈ {0, 1}`.
//! * `TruncatedNormalClosedForm`: per interval, the two-node Gauss rule whose
//!   first four moments equal the closed-form truncated normal moments. It is
//!   exact for integrands that are polynomials of degree ≤ 3 in `y` on each
//!   interval (the case for piecewise-constant selection with Gaussian
//!   outcomes and linear working models).
//! * `GaussHermite`: Gauss–Hermite nodes centred and scaled at the
//!   conditional mean and SD when the support is the whole line. Proper
//!   intervals are clipped at ±12 SD and integrated with Gauss–Legendre nodes
//!   in standardized units, so indicator boundaries never fall between nodes.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::normal::pdf;
use super::truncnorm::{standard_partial_moments, MIN_MASS};
use crate::error::{Error, Result};

/// Half-open interval `(lo, hi]`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "ext_f64")]
    pub lo: f64,
    #[serde(with = "ext_f64")]
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "interval requires lo < hi (got {lo}, {hi})");
        Interval { lo, hi }
    }

    pub fn try_new(lo: f64, hi: f64) -> Result<Self> {
        if lo < hi {
            Ok(Interval { lo, hi })
        } else {
            Err(Error::Input(format!("interval requires lo < hi (got {lo}, {hi})")))
        }
    }

    pub fn real_line() -> Self {
        Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }
    }

    pub fn below(hi: f64) -> Self {
        Interval::new(f64::NEG_INFINITY, hi)
    }

    pub fn above(lo: f64) -> Self {
        Interval::new(lo, f64::INFINITY)
    }

    #[inline]
    pub fn contains(&self, y: f64) -> bool {
        self.lo < y && y <= self.hi
    }

    pub fn is_real_line(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }
}

/// A union of pairwise disjoint intervals (the positive-selection set `D`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Support {
    intervals: Vec<Interval>,
}

impl Support {
    pub fn new(mut intervals: Vec<Interval>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::Input("support needs at least one interval".into()));
        }
        intervals.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        for w in intervals.windows(2) {
            if w[1].lo < w[0].hi {
                return Err(Error::Input(format!("support intervals overlap: {:?} and {:?}", w[0], w[1])));
            }
        }
        Ok(Support { intervals })
    }

    pub fn real_line() -> Self {
        Support { intervals: vec![Interval::real_line()] }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    #[inline]
    pub fn contains(&self, y: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(y))
    }

    pub fn is_real_line(&self) -> bool {
        self.intervals.len() == 1 && self.intervals[0].is_real_line()
    }
}

/// The conditional law of `Y` that the rule integrates against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YLaw {
    Bernoulli { p1: f64 },
    Gaussian { mean: f64, sd: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureMethod {
    TwoPointBinary,
    TruncatedNormalClosedForm,
    GaussHermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub method: QuadratureMethod,
    pub nodes: usize,
    pub abs_tol: f64,
}

impl QuadratureSpec {
    pub fn two_point() -> Self {
        QuadratureSpec { method: QuadratureMethod::TwoPointBinary, nodes: 2, abs_tol: 1e-12 }
    }

    pub fn closed_form() -> Self {
        QuadratureSpec { method: QuadratureMethod::TruncatedNormalClosedForm, nodes: 2, abs_tol: 1e-12 }
    }

    pub fn gauss_hermite(nodes: usize) -> Result<Self> {
        if nodes < 16 {
            return Err(Error::Input(format!("gauss_hermite needs >= 16 nodes, got {nodes}")));
        }
        Ok(QuadratureSpec { method: QuadratureMethod::GaussHermite, nodes, abs_tol: 1e-8 })
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec { method: QuadratureMethod::GaussHermite, nodes: 64, abs_tol: 1e-8 }
    }
}

/// Clip point, in standard deviations, for Gauss–Legendre pieces.
const CLIP_SD: f64 = 12.0;

/// Nodes and weights representing `f(y) · I(y ∈ support) dy`.
#[derive(Debug, Clone, PartialEq)]
pub struct YRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl YRule {
    pub fn build(law: &YLaw, support: &Support, spec: &QuadratureSpec) -> Result<YRule> {
        let mut rule = YRule { nodes: Vec::with_capacity(4), weights: Vec::with_capacity(4) };
        match *law {
            YLaw::Bernoulli { p1 } => {
                if !(0.0..=1.0).contains(&p1) {
                    return Err(Error::Domain(format!("Bernoulli probability {p1}")));
                }
                for (y, w) in [(0.0, 1.0 - p1), (1.0, p1)] {
                    if support.contains(y) {
                        rule.nodes.push(y);
                        rule.weights.push(w);
                    }
                }
            }
            YLaw::Gaussian { mean, sd } => {
                if !(sd > 0.0) || !sd.is_finite() || !mean.is_finite() {
                    return Err(Error::Domain(format!("Gaussian law N({mean}, {sd}^2)")));
                }
                match spec.method {
                    QuadratureMethod::TwoPointBinary => {
                        return Err(Error::Input("two-point rule requires a binary outcome".into()))
                    }
                    QuadratureMethod::TruncatedNormalClosedForm => {
                        for iv in support.intervals() {
                            push_moment_rule(&mut rule, mean, sd, iv);
                        }
                    }
                    QuadratureMethod::GaussHermite => {
                        for iv in support.intervals() {
                            if iv.is_real_line() {
                                for &(x, w) in hermite_rule(spec.nodes).iter() {
                                    rule.nodes.push(mean + std::f64::consts::SQRT_2 * sd * x);
                                    rule.weights.push(w / std::f64::consts::PI.sqrt());
                                }
                            } else {
                                push_clipped_legendre(&mut rule, mean, sd, iv, spec.nodes);
                            }
                        }
                    }
                }
            }
        }
        Ok(rule)
    }

    /// Total weight, i.e. `P(Y ∈ support)`.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Two-node Gauss rule matching the truncated moments of order 0..=3.
fn push_moment_rule(rule: &mut YRule, mean: f64, sd: f64, iv: &Interval) {
    let a = (iv.lo - mean) / sd;
    let b = (iv.hi - mean) / sd;
    let m = standard_partial_moments(a, b);
    if m[0] < MIN_MASS {
        return;
    }
    let tbar = m[1] / m[0];
    let c2 = (m[2] / m[0] - tbar * tbar).max(0.0);
    let c3 = m[3] / m[0] - 3.0 * tbar * m[2] / m[0] + 2.0 * tbar.powi(3);
    if c2 <= 1e-300 {
        rule.nodes.push(inside(mean + sd * tbar, iv));
        rule.weights.push(m[0]);
        return;
    }
    // nodes relative to the mean are the roots of x² − (c3/c2)x − c2
    let s = c3 / c2;
    let disc = (s * s + 4.0 * c2).sqrt();
    let x1 = 0.5 * (s - disc);
    let x2 = 0.5 * (s + disc);
    let w1 = m[0] * x2 / (x2 - x1);
    let w2 = -m[0] * x1 / (x2 - x1);
    for (x, w) in [(x1, w1), (x2, w2)] {
        rule.nodes.push(inside(mean + sd * (tbar + x), iv));
        rule.weights.push(w);
    }
}

// Keep a node inside the half-open interval despite rounding.
#[inline]
fn inside(y: f64, iv: &Interval) -> f64 {
    if y <= iv.lo {
        iv.lo.next_up()
    } else if y > iv.hi {
        iv.hi
    } else {
        y
    }
}

fn push_clipped_legendre(rule: &mut YRule, mean: f64, sd: f64, iv: &Interval, n: usize) {
    let a = ((iv.lo - mean) / sd).max(-CLIP_SD);
    let b = ((iv.hi - mean) / sd).min(CLIP_SD);
    if a >= b {
        return;
    }
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    for &(x, w) in legendre_rule(n).iter() {
        let t = mid + half * x;
        rule.nodes.push(inside(mean + sd * t, iv));
        rule.weights.push(half * w * pdf(t));
    }
}

type NodeCache = Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>;

fn cached(cache: &'static OnceLock<NodeCache>, n: usize, make: fn(usize) -> Vec<(f64, f64)>) -> Arc<Vec<(f64, f64)>> {
    let map = cache.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().expect("node cache poisoned");
    guard.entry(n).or_insert_with(|| Arc::new(make(n))).clone()
}

/// Gauss–Hermite nodes/weights for the weight `exp(−x²)`.
pub fn hermite_rule(n: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<NodeCache> = OnceLock::new();
    cached(&CACHE, n, compute_hermite)
}

/// Gauss–Legendre nodes/weights on [−1, 1].
pub fn legendre_rule(n: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<NodeCache> = OnceLock::new();
    cached(&CACHE, n, compute_legendre)
}

// Newton iteration on the orthonormal Hermite recurrence, with the usual
// asymptotic starting guesses.
fn compute_hermite(n: usize) -> Vec<(f64, f64)> {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    let m = (n + 1) / 2;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let mut out: Vec<(f64, f64)> = x.into_iter().zip(w).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn compute_legendre(n: usize) -> Vec<(f64, f64)> {
    let nf = n as f64;
    let m = (n + 1) / 2;
    let mut out = vec![(0.0, 0.0); n];
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        out[i] = (-z, w);
        out[n - 1 - i] = (z, w);
    }
    out
}

/// `∫_support integrand(y) f(y) dy` where `f` is the density (or pmf) of `law`.
///
/// With the closed-form method the integrand must be a polynomial of degree
/// at most 3 in `y` on every support interval for the result to be exact.
pub fn integrate_y<F: Fn(f64) -> f64>(
    integrand: F,
    law: &YLaw,
    support: &Support,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let rule = YRule::build(law, support, spec)?;
    let mut acc = 0.0;
    for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v = integrand(y);
        if !v.is_finite() {
            return Err(Error::Numeric { what: format!("non-finite integrand {v}"), location: format!("y = {y}") });
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Vector-valued version of [`integrate_y`].
pub fn integrate_y_vec<F: Fn(f64) -> Vec<f64>>(
    integrand: F,
    dim: usize,
    law: &YLaw,
    support: &Support,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    let rule = YRule::build(law, support, spec)?;
    let mut acc = vec![0.0; dim];
    for (&y, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v = integrand(y);
        if v.len() != dim || v.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numeric {
                what: "non-finite or misshapen integrand".into(),
                location: format!("y = {y}"),
            });
        }
        for (a, t) in acc.iter_mut().zip(&v) {
            *a += w * t;
        }
    }
    Ok(acc)
}

/// Serde helper writing ±∞ as strings so interval bounds survive JSON.
pub(crate) mod ext_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
                "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("bad bound '{other}'"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::normal;

    fn std_normal() -> YLaw {
        YLaw::Gaussian { mean: 0.0, sd: 1.0 }
    }

    #[test]
    fn normalization_on_real_line() {
        let v = integrate_y(|_| 1.0, &std_normal(), &Support::real_line(), &QuadratureSpec::default()).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let v = integrate_y(|_| 1.0, &std_normal(), &Support::real_line(), &QuadratureSpec::closed_form()).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn first_moment_of_lower_tail() {
        let d = Support::new(vec![Interval::below(-0.63)]).unwrap();
        let expected = -normal::pdf(0.63);
        assert!((expected + 0.32713).abs() < 1e-5);
        for spec in [QuadratureSpec::default(), QuadratureSpec::closed_form()] {
            let v = integrate_y(|y| y, &std_normal(), &d, &spec).unwrap();
            assert!((v - expected).abs() < 1e-10, "{spec:?}: {v}");
        }
    }

    #[test]
    fn hermite_rule_integrates_polynomials() {
        let rule = hermite_rule(64);
        let total: f64 = rule.iter().map(|p| p.1).sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        // ∫ x^4 e^{-x²} = 3√π/4
        let m4: f64 = rule.iter().map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 0.75 * std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn closed_form_rule_is_exact_for_cubics() {
        let law = YLaw::Gaussian { mean: 0.4, sd: 1.7 };
        let d = Support::new(vec![Interval::below(-0.63), Interval::above(2.63)]).unwrap();
        let p = |y: f64| 0.3 - 1.2 * y + 0.7 * y * y - 0.05 * y * y * y;
        let exact = integrate_y(p, &law, &d, &QuadratureSpec::closed_form()).unwrap();
        let quad = integrate_y(p, &law, &d, &QuadratureSpec::gauss_hermite(96).unwrap()).unwrap();
        assert!((exact - quad).abs() < 1e-9, "{exact} vs {quad}");
    }

    #[test]
    fn binary_rule_respects_support() {
        let law = YLaw::Bernoulli { p1: 0.3 };
        let all = YRule::build(&law, &Support::real_line(), &QuadratureSpec::two_point()).unwrap();
        assert_eq!(all.len(), 2);
        let cases = Support::new(vec![Interval::above(0.5)]).unwrap();
        let only = YRule::build(&law, &cases, &QuadratureSpec::two_point()).unwrap();
        assert_eq!(only.nodes, vec![1.0]);
    }

    #[test]
    fn non_finite_integrand_reports_location() {
        let e = integrate_y(
            |y| if y > 0.5 { f64::NAN } else { 1.0 },
            &YLaw::Bernoulli { p1: 0.5 },
            &Support::real_line(),
            &QuadratureSpec::two_point(),
        );
        match e {
            Err(Error::Numeric { location, .. }) => assert!(location.contains("y = 1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn support_rejects_overlap() {
        assert!(Support::new(vec![Interval::below(1.0), Interval::above(0.0)]).is_err());
        assert!(QuadratureSpec::gauss_hermite(8).is_err());
    }

    #[test]
    fn interval_json_round_trip_with_infinities() {
        let iv = Interval::below(-0.63);
        let s = serde_json::to_string(&iv).unwrap();
        assert_eq!(s, r#"{"lo":"-inf","hi":-0.63}"#);
        let back: Interval = serde_json::from_str(&s).unwrap();
        assert_eq!(back, iv);
    }
}
