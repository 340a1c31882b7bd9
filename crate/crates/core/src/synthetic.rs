//! Synthetic benchmark week: an hourly load profile with a daily cycle, a
//! morning peak and lighter weekends, flat base generation at the mean load,
//! and a noisy forecast of the load.

use chrono::{NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::series::LoadSeries;

pub const WEEK_HOURS: usize = 168;
/// Forecast noise as a fraction of the peak load.
pub const NOISE_LEVEL: f64 = 0.05;
pub const NOISE_SEED: u64 = 2016;

/// Regularization parameters scanned by the benchmark.
pub const ALPHA_GRID: [f64; 13] = [
    0.0, 0.05, 0.1, 0.2, 0.3, 0.4217, 0.5, 0.75, 0.9998, 1.5, 2.0, 3.0, 5.0,
];

/// Monday 2016-04-25 00:00.
pub fn week_origin() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2016, 4, 25)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid date")
}

/// Load in MW at hour `t` of the week.
pub fn load_profile(t: f64) -> f64 {
    let hour = t.rem_euclid(24.0);
    let day = (t / 24.0).floor() as i64;
    let daily = 3200.0
        + 600.0 * (2.0 * std::f64::consts::PI * (hour - 8.0) / 24.0).sin()
        + 500.0 * (-(hour - 9.0).powi(2) / 6.0).exp();
    if day == 5 || day == 6 {
        0.9 * daily
    } else {
        daily
    }
}

/// 169 hourly samples, hours 0 through 168.
pub fn weekly_load() -> LoadSeries {
    let values = (0..=WEEK_HOURS).map(|k| load_profile(k as f64)).collect();
    LoadSeries::hourly(values)
        .expect("finite uniform profile")
        .with_origin(week_origin())
}

/// Constant base generation at the mean of `load`.
pub fn base_generation(load: &LoadSeries) -> LoadSeries {
    load.with_values(vec![load.mean(); load.len()])
        .expect("same grid")
}

/// `actual + U(-level * peak, level * peak)`, drawn independently per sample.
pub fn noisy_forecast(actual: &LoadSeries, level: f64, seed: u64) -> Result<LoadSeries> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::config("noise level must be nonnegative"));
    }
    let amplitude = level * actual.peak();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = actual
        .values()
        .iter()
        .map(|&v| {
            if amplitude > 0.0 {
                v + rng.gen_range(-amplitude..=amplitude)
            } else {
                v
            }
        })
        .collect();
    actual.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_shape() {
        let load = weekly_load();
        assert_eq!(load.len(), WEEK_HOURS + 1);
        assert_eq!(load.step(), Some(1.0));
        assert_eq!(
            load.timestamp(168).unwrap().to_string(),
            "2016-05-02 00:00:00"
        );
        // weekday peak above the weekend peak
        assert!(load.values()[9] > load.values()[5 * 24 + 9]);
        let base = base_generation(&load);
        assert!(base.values().iter().all(|&b| b == load.mean()));
    }

    #[test]
    fn noise_is_reproducible_and_bounded() {
        let load = weekly_load();
        let a = noisy_forecast(&load, NOISE_LEVEL, 7).unwrap();
        assert_eq!(a, noisy_forecast(&load, NOISE_LEVEL, 7).unwrap());
        assert_ne!(a, noisy_forecast(&load, NOISE_LEVEL, 8).unwrap());
        let bound = NOISE_LEVEL * load.peak();
        assert!(a
            .values()
            .iter()
            .zip(load.values())
            .all(|(x, y)| (x - y).abs() <= bound));
        assert_eq!(noisy_forecast(&load, 0.0, 1).unwrap(), load);
    }
}
