use serde::{Deserialize, Serialize};

use crate::estimators::FitResult;
use crate::numerics::normal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldRow {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Two-sided normal test against zero and a `1 − level` confidence interval.
pub fn wald_row(name: &str, estimate: f64, se: f64, level: f64) -> WaldRow {
    let z = estimate / se;
    let p_value = if z.is_nan() { f64::NAN } else { (2.0 * normal::sf(z.abs())).min(1.0) };
    let crit = normal::quantile(1.0 - level / 2.0);
    WaldRow {
        name: name.to_string(),
        estimate,
        se,
        z,
        p_value,
        ci_low: estimate - crit * se,
        ci_high: estimate + crit * se,
    }
}

/// Estimate, standard error, p-value and interval per reported coefficient.
/// `level` is the significance level (0.05 gives 95% intervals).
pub fn wald_summary(fit: &FitResult, level: f64) -> Vec<WaldRow> {
    fit.reported().iter().map(|c| wald_row(&c.name, c.estimate, c.se, level)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_estimate_has_unit_p_value() {
        assert_eq!(wald_row("b", 0.0, 1.0, 0.05).p_value, 1.0);
    }

    #[test]
    fn classic_five_percent_point() {
        let r = wald_row("b", 1.959963984540054, 1.0, 0.05);
        assert!((r.p_value - 0.05).abs() < 1e-12);
    }

    #[test]
    fn interval_endpoints() {
        let r = wald_row("b", 0.7, 0.2, 0.05);
        let z = normal::quantile(0.975);
        assert_eq!(r.ci_low, 0.7 - z * 0.2);
        assert_eq!(r.ci_high, 0.7 + z * 0.2);
    }
}
