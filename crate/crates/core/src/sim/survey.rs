//! Synthetic stand-in for a health-survey cohort: blood pressure regressed on
//! body mass index and age (phase 1) and three dietary measurements (phase 2).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::model::{Dataset, ObservationRecord};
use crate::numerics::rng::{Purpose, StreamKey};
use crate::numerics::Support;

/// Size of the cohort the generator imitates.
pub const SURVEY_N: usize = 6453;

/// Outcome coefficients on the analysis scale (log outcome and log BMI
/// centered, the rest standardized): sodium, saturated fat, salt use,
/// log BMI, age.
pub const SURVEY_BETA: [f64; 5] = [0.005, -0.005, -0.005, 0.0959, 0.078];

const SALT_LEVELS: [(f64, f64); 4] = [(0.0, 0.30), (1.0, 0.25), (3.0, 0.30), (4.0, 0.15)];

/// Complete data with columns `sbp`, `bmi`, `age` (phase 1) and `sodium`,
/// `satfat`, `saltprep` (phase 2), all on their natural units.
pub fn survey_dataset(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = StreamKey::new(seed, 0, Purpose::Other(2)).rng();
    let support = Support::real_line();
    let log_bmi0 = 28.5f64.ln();
    let (sodium_mean, sodium_sd) = (3659.0, 1751.0);
    let (fat_mean, fat_sd) = (30.2, 18.0);
    let (salt_mean, salt_sd) = (1.75, 1.512);
    let [b_na, b_fat, b_salt, b_bmi, b_age] = SURVEY_BETA;
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let n1: f64 = StandardNormal.sample(&mut rng);
        let n2: f64 = StandardNormal.sample(&mut rng);
        let n3: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        let age = rng.random_range(18.0..80.0);
        let log_bmi = log_bmi0 + 0.002 * (age - 49.0) + 0.22 * n1;
        let log_na = 3300f64.ln() + 0.3 * (log_bmi - log_bmi0) + 0.45 * n2;
        let log_fat = 26f64.ln() + 0.5 * (log_na - 3300f64.ln()) + 0.5 * n3;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut salt = SALT_LEVELS[3].0;
        for (level, p) in SALT_LEVELS {
            acc += p;
            if u < acc {
                salt = level;
                break;
            }
        }
        let (sodium, satfat) = (log_na.exp(), log_fat.exp());
        let log_sbp = 4.8
            + b_na * (sodium - sodium_mean) / sodium_sd
            + b_fat * (satfat - fat_mean) / fat_sd
            + b_salt * (salt - salt_mean) / salt_sd
            + b_bmi * (log_bmi - log_bmi0)
            + b_age * (age - 49.0) / 17.9
            + 0.11 * e;
        let round = |v: f64, k: i32| (v * 10f64.powi(k)).round() / 10f64.powi(k);
        records.push(ObservationRecord::new(
            round(log_sbp.exp(), 1),
            vec![round(log_bmi.exp(), 2), round(age, 1)],
            Some(vec![round(sodium, 1), round(satfat, 2), salt]),
            true,
            &support,
        )?);
    }
    Dataset::new(
        records,
        "sbp",
        vec!["bmi".into(), "age".into()],
        vec!["sodium".into(), "satfat".into(), "saltprep".into()],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plausible_ranges() {
        let d = survey_dataset(2000, 3).unwrap();
        assert!(d.records.iter().all(|r| r.y > 50.0 && r.y < 300.0 && r.x[0] > 10.0 && r.x[0] < 80.0));
        let mean_sbp = d.records.iter().map(|r| r.y).sum::<f64>() / 2000.0;
        assert!((mean_sbp - 122.0).abs() < 5.0, "{mean_sbp}");
        assert_eq!(d, survey_dataset(2000, 3).unwrap());
    }
}
