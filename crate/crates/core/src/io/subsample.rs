use rand::Rng;
use serde::{Deserialize, Serialize};

use super::schema::quantile_sorted;
use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::numerics::rng::{Purpose, StreamKey};

/// What a stratified subsample did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsampleSummary {
    pub quantiles: [f64; 2],
    pub alpha: [f64; 2],
    /// Outcome cut points `c₁ < c₂`; the strata are `(−∞, c₁]`, `(c₁, c₂]`, `(c₂, ∞)`.
    pub cuts: [f64; 2],
    pub stratum_sizes: [usize; 3],
    pub selected: [usize; 3],
    pub phase2_size: usize,
    pub seed: u64,
}

/// Two-phase sample from complete data: the outcome is cut at its empirical
/// quantiles, rows in the two tails are Bernoulli-sampled with probabilities
/// `alpha`, the middle stratum is never sampled, and `z` is masked off phase 2.
pub fn stratified_subsample(
    data: &Dataset,
    quantiles: [f64; 2],
    alpha: [f64; 2],
    seed: u64,
) -> Result<(Dataset, SubsampleSummary)> {
    if let Some(i) = data.records.iter().position(|r| r.z.is_none()) {
        return Err(Error::Data {
            row: i + 1,
            column: data.z_names.first().cloned().unwrap_or_default(),
            message: "subsampling needs complete data but z is missing".into(),
        });
    }
    if !(0.0 < quantiles[0] && quantiles[0] < quantiles[1] && quantiles[1] < 1.0) {
        return Err(Error::Config(format!("quantiles {quantiles:?} must satisfy 0 < q1 < q2 < 1")));
    }
    if alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::Config(format!("sampling probabilities {alpha:?} must lie in [0, 1]")));
    }
    let mut ys: Vec<f64> = data.records.iter().map(|r| r.y).collect();
    ys.sort_by(f64::total_cmp);
    let cuts = [quantile_sorted(&ys, quantiles[0]), quantile_sorted(&ys, quantiles[1])];
    let stratum = |y: f64| {
        if y <= cuts[0] {
            0
        } else if y <= cuts[1] {
            1
        } else {
            2
        }
    };
    let mut sizes = [0usize; 3];
    for r in &data.records {
        sizes[stratum(r.y)] += 1;
    }
    if let Some(k) = sizes.iter().position(|&c| c == 0) {
        return Err(Error::Data {
            row: 0,
            column: data.y_name.clone(),
            message: format!("stratum {} is empty; ties at the quantile cut points {cuts:?}", k + 1),
        });
    }

    let mut rng = StreamKey::new(seed, 0, Purpose::Subsample).rng();
    let mut out = data.clone();
    let mut selected = [0usize; 3];
    for rec in out.records.iter_mut() {
        let k = stratum(rec.y);
        let p = match k {
            0 => alpha[0],
            2 => alpha[1],
            _ => 0.0,
        };
        // one draw per row keeps the stream aligned across strata
        let u: f64 = rng.random();
        rec.s = k != 1;
        rec.r = u < p;
        if rec.r {
            selected[k] += 1;
        } else {
            rec.z = None;
        }
    }
    let summary = SubsampleSummary {
        quantiles,
        alpha,
        cuts,
        stratum_sizes: sizes,
        selected,
        phase2_size: selected.iter().sum(),
        seed,
    };
    Ok((out, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObservationRecord;
    use crate::numerics::Support;

    fn complete(n: usize) -> Dataset {
        let d = Support::real_line();
        let recs =
            (0..n).map(|i| ObservationRecord::new(i as f64, vec![1.0], Some(vec![2.0]), true, &d).unwrap()).collect();
        Dataset::new(recs, "y", vec!["x".into()], vec!["z".into()]).unwrap()
    }

    #[test]
    fn certain_sampling_takes_both_tails() {
        let d = complete(100);
        let (s, info) = stratified_subsample(&d, [0.25, 0.75], [1.0, 1.0], 7).unwrap();
        for r in &s.records {
            let tail = r.y <= info.cuts[0] || r.y > info.cuts[1];
            assert_eq!(r.r, tail);
            assert_eq!(r.z.is_some(), tail);
        }
        assert_eq!(info.selected[1], 0);
    }

    #[test]
    fn deterministic_under_seed() {
        let d = complete(500);
        let a = stratified_subsample(&d, [0.25, 0.75], [0.4, 0.4], 11).unwrap();
        let b = stratified_subsample(&d, [0.25, 0.75], [0.4, 0.4], 11).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn tied_quantiles_are_rejected() {
        let dsup = Support::real_line();
        let recs = (0..20)
            .map(|i| {
                ObservationRecord::new(if i < 18 { 1.0 } else { 2.0 }, vec![], Some(vec![0.0]), true, &dsup).unwrap()
            })
            .collect();
        let d = Dataset::new(recs, "y", vec![], vec!["z".into()]).unwrap();
        assert!(matches!(stratified_subsample(&d, [0.25, 0.75], [0.4, 0.4], 1), Err(Error::Data { .. })));
    }
}
