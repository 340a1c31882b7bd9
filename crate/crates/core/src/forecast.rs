//! Seasonal-naive load forecasts and forecast error metrics.
//!
//! This is the baseline forecaster of the pipeline. Any other model can be
//! used by writing its forecast as a `timestamp,mw` CSV and passing that to
//! `dispatch --load`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{error_metrics, LoadSeries};

pub const DAILY_PERIOD: usize = 24;
pub const WEEKLY_PERIOD: usize = 168;

#[derive(Clone, Debug)]
pub struct ForecastRequest {
    history: LoadSeries,
    horizon: usize,
    period: usize,
}

impl ForecastRequest {
    pub fn new(history: LoadSeries, horizon: usize, period: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::config("forecast horizon must be at least one step"));
        }
        if period == 0 {
            return Err(Error::config("seasonal period must be at least one step"));
        }
        if history.len() < period.max(2) {
            return Err(Error::config(format!(
                "history has {} samples, the period needs {}",
                history.len(),
                period.max(2)
            )));
        }
        Ok(ForecastRequest {
            history,
            horizon,
            period,
        })
    }

    pub fn history(&self) -> &LoadSeries {
        &self.history
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn period(&self) -> usize {
        self.period
    }
}

/// `forecast(t_n + k h) = history(t_n + k h - P h)`, repeating the last
/// observed cycle when the horizon exceeds the period.
pub fn seasonal_naive(request: &ForecastRequest) -> Result<LoadSeries> {
    let history = &request.history;
    let n = history.len();
    let step = history.step().expect("history has two samples");
    let last = history.times()[n - 1];
    let values = history.values();
    let (times, forecast): (Vec<f64>, Vec<f64>) = (1..=request.horizon)
        .map(|k| {
            let source = n - request.period + (k - 1) % request.period;
            (last + k as f64 * step, values[source])
        })
        .unzip();
    let out = LoadSeries::new(times, forecast)?;
    Ok(match history.origin() {
        Some(o) => out.with_origin(o),
        None => out,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ForecastMetrics {
    pub mae: f64,
    pub rmse: f64,
}

pub fn forecast_metrics(forecast: &LoadSeries, actual: &LoadSeries) -> Result<ForecastMetrics> {
    if !forecast.same_grid(actual) {
        return Err(Error::config(
            "forecast and actual series are on different grids",
        ));
    }
    let (mae, rmse) = error_metrics(forecast.values(), actual.values());
    Ok(ForecastMetrics { mae, rmse })
}
