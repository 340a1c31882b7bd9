//! Uniformly sampled power series (MW) on an hourly time axis.

use chrono::{Duration, NaiveDateTime};

use crate::error::{Error, Result};

/// Relative tolerance on the sampling step.
const STEP_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LoadSeries {
    /// Hours; relative to `origin` when it is set.
    times: Vec<f64>,
    values: Vec<f64>,
    origin: Option<NaiveDateTime>,
}

impl LoadSeries {
    /// Rows in errors are 1-based data rows (header not counted).
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::config(format!(
                "series has {} timestamps and {} values",
                times.len(),
                values.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::format(None, "series is empty"));
        }
        if let Some(i) = times
            .iter()
            .zip(&values)
            .position(|(t, v)| !t.is_finite() || !v.is_finite())
        {
            return Err(Error::format(Some(i + 1), "non-finite timestamp or value"));
        }
        if times.len() >= 2 {
            let step = times[1] - times[0];
            if !(step > 0.0) {
                return Err(Error::format(
                    Some(2),
                    "timestamps must be strictly increasing",
                ));
            }
            for (i, w) in times.windows(2).enumerate().skip(1) {
                let d = w[1] - w[0];
                if (d - step).abs() > STEP_TOLERANCE * step.max(1.0) {
                    return Err(Error::format(
                        Some(i + 2),
                        format!("step {d} differs from the inferred step {step}"),
                    ));
                }
            }
        }
        Ok(LoadSeries {
            times,
            values,
            origin: None,
        })
    }

    /// Hourly series starting at hour 0.
    pub fn hourly(values: Vec<f64>) -> Result<Self> {
        let times = (0..values.len()).map(|k| k as f64).collect();
        Self::new(times, values)
    }

    pub fn with_origin(mut self, origin: NaiveDateTime) -> Self {
        self.origin = Some(origin);
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn origin(&self) -> Option<NaiveDateTime> {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> Option<f64> {
        (self.times.len() >= 2).then(|| self.times[1] - self.times[0])
    }

    /// Hours from the first to the last sample.
    pub fn span(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// Timestamp of sample `k`, when the series has a calendar origin.
    pub fn timestamp(&self, k: usize) -> Option<NaiveDateTime> {
        self.origin
            .map(|o| o + Duration::milliseconds((self.times[k] * 3.6e6).round() as i64))
    }

    /// Same values on a new time axis with the same origin.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        let mut out = Self::new(self.times.clone(), values)?;
        out.origin = self.origin;
        Ok(out)
    }

    /// Same sampling instants, comparing calendar time when both series have
    /// an origin.
    pub fn same_grid(&self, other: &LoadSeries) -> bool {
        if self.len() != other.len() {
            return false;
        }
        let offset = match (self.origin, other.origin) {
            (Some(a), Some(b)) => (b - a).num_milliseconds() as f64 / 3.6e6,
            (None, None) => 0.0,
            _ => return false,
        };
        let scale = self.step().unwrap_or(1.0).max(1.0);
        self.times
            .iter()
            .zip(&other.times)
            .all(|(a, b)| (a - (b + offset)).abs() <= STEP_TOLERANCE * scale)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / self.len() as f64
    }

    pub fn peak(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Mean absolute and root-mean-square difference.
pub fn error_metrics(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len().max(1) as f64;
    let mae = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n;
    let rmse = (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n).sqrt();
    // equal absolute errors can leave mae one ulp above rmse
    (mae.min(rmse), rmse)
}
