//! Active-case forecasting and conversion of horizon maxima into ideal shares.
//!
//! The forecaster is a level + additive trend exponential smoother. The
//! recursion starts from `level = y[0]` and `trend = y[1] - y[0]`, so a
//! series that is exactly linear is reproduced exactly.

use serde::{Deserialize, Serialize};

use crate::error::ForecastError;
use crate::exec::{self, Execution};
use crate::model::{HistoryPoint, RegionRecord, SmoothingParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub region: String,
    pub fitted_level: f64,
    pub fitted_trend: f64,
    /// Point forecasts for steps 1..=h past the last observation.
    pub predicted: Vec<f64>,
    /// Largest forecast, with negatives floored at zero.
    pub horizon_max: f64,
}

fn check_smoothing(params: SmoothingParams) -> Result<(), ForecastError> {
    for (name, value) in [("level", params.level), ("trend", params.trend)] {
        if !(value > 0.0 && value <= 1.0) {
            return Err(ForecastError::BadSmoothing { name, value });
        }
    }
    Ok(())
}

/// Fits the smoother to `history` and projects `horizon` steps ahead.
pub fn fit_forecast(
    history: &[f64],
    horizon: usize,
    params: SmoothingParams,
) -> Result<ForecastResult, ForecastError> {
    if history.len() < 2 {
        return Err(ForecastError::InsufficientHistory(history.len()));
    }
    if horizon == 0 {
        return Err(ForecastError::ZeroHorizon);
    }
    check_smoothing(params)?;

    let mut level = history[0];
    let mut trend = history[1] - history[0];
    for &y in &history[1..] {
        let prev_level = level;
        level = params.level * y + (1.0 - params.level) * (level + trend);
        trend = params.trend * (level - prev_level) + (1.0 - params.trend) * trend;
    }

    let predicted: Vec<f64> = (1..=horizon).map(|k| level + k as f64 * trend).collect();
    let horizon_max = predicted.iter().fold(0.0_f64, |m, &p| m.max(p));
    Ok(ForecastResult {
        region: String::new(),
        fitted_level: level,
        fitted_trend: trend,
        predicted,
        horizon_max,
    })
}

/// Expands a dated history into one value per calendar day, forward-filling
/// missing dates. Returns the daily series and the number of filled days.
pub fn daily_series(history: &[HistoryPoint]) -> (Vec<f64>, usize) {
    let mut out = Vec::with_capacity(history.len());
    let mut filled = 0;
    for (i, point) in history.iter().enumerate() {
        if i > 0 {
            let prev = history[i - 1];
            let gap = (point.date - prev.date).num_days();
            for _ in 1..gap.max(1) {
                out.push(prev.active as f64);
                filled += 1;
            }
        }
        out.push(point.active as f64);
    }
    (out, filled)
}

/// Forecast for one region from its dated history. The second element is a
/// data-quality warning when gaps had to be forward-filled.
pub fn forecast_region(
    region: &RegionRecord,
    horizon: usize,
    params: SmoothingParams,
) -> Result<(ForecastResult, Option<String>), ForecastError> {
    let (series, filled) = daily_series(&region.history);
    let mut result = fit_forecast(&series, horizon, params)?;
    result.region = region.name.clone();
    let warning = (filled > 0).then(|| {
        format!(
            "{}: forward-filled {filled} missing day(s) in history",
            region.name
        )
    });
    Ok((result, warning))
}

/// Forecasts every region, fanning out across threads when requested.
/// Output order follows input order regardless of execution mode.
pub fn forecast_all(
    regions: &[RegionRecord],
    horizon: usize,
    params: SmoothingParams,
    mode: Execution,
) -> Vec<Result<(ForecastResult, Option<String>), ForecastError>> {
    exec::map(mode, regions, |r| forecast_region(r, horizon, params))
}

/// Normalises horizon maxima into weights summing to one.
pub fn ideal_weights(maxima: &[f64]) -> Result<Vec<f64>, ForecastError> {
    if let Some(i) = maxima.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(ForecastError::NegativePrediction(i));
    }
    let sum: f64 = maxima.iter().sum();
    if sum <= 0.0 {
        return Err(ForecastError::NoPredictedDemand);
    }
    Ok(maxima.iter().map(|p| p / sum).collect())
}

pub fn ideal_allocation(weights: &[f64], total: f64) -> Vec<f64> {
    weights.iter().map(|w| w * total).collect()
}
