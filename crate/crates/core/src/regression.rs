//! Persistence-based regressions fitted by least squares.
//!
//! * PAR: `n` autoregressive lags plus one persistence term.
//! * PAR-W: PAR plus the solar forecast (and optionally temperature).
//! * SPR: a 15-feature vector built from days `d−1` and `d−7`.
//!
//! Fitting functions take a history that ends at the forecast origin and use
//! the last `train_days` days of it as targets. Feature values may reach
//! further back than the training window.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::DayForecast;
use crate::ols::fit_ols_rows;
use crate::persistence::PersistenceConfig;
use crate::series::{Calendar, LoadSeries, WeatherSeries, SLOTS_PER_DAY};

pub const DEFAULT_RIDGE: f64 = 1e-8;
pub const SPR_FEATURES: usize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParConfig {
    pub n_lags: usize,
    pub pm: PersistenceConfig,
    pub use_solar: bool,
    pub use_temperature: bool,
    pub ridge: f64,
}

impl Default for ParConfig {
    fn default() -> Self {
        Self {
            n_lags: 4,
            pm: PersistenceConfig::consecutive_days(PersistenceConfig::DEFAULT_CONSECUTIVE_N),
            use_solar: false,
            use_temperature: false,
            ridge: DEFAULT_RIDGE,
        }
    }
}

impl ParConfig {
    /// PAR-W defaults: PAR plus the solar term.
    pub fn with_weather() -> Self {
        Self {
            use_solar: true,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_lags == 0 {
            return Err(Error::config("par.n_lags", "must be at least 1"));
        }
        if self.pm.n == 0 {
            return Err(Error::config("par.pm.n", "must be at least 1"));
        }
        if self.use_temperature && !self.use_solar {
            return Err(Error::config("par.use_temperature", "requires use_solar"));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::config("par.ridge", "must be >= 0"));
        }
        Ok(())
    }

    /// First day whose every slot has complete lag and persistence inputs.
    fn first_day(&self) -> usize {
        self.pm.lookback_days().max(self.n_lags.div_ceil(SLOTS_PER_DAY))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParWeights {
    /// `a_1..a_n`; `ar[0]` multiplies the most recent lag.
    pub ar: Vec<f64>,
    pub persistence: f64,
    pub solar: Option<f64>,
    pub temperature: Option<f64>,
    pub n_lags: usize,
    pub pm: PersistenceConfig,
}

impl ParWeights {
    /// Weights that reproduce the persistence model exactly.
    pub fn pure_persistence(n_lags: usize, pm: PersistenceConfig) -> Self {
        Self {
            ar: vec![0.0; n_lags],
            persistence: 1.0,
            solar: None,
            temperature: None,
            n_lags,
            pm,
        }
    }

    pub fn model_id(&self) -> &'static str {
        if self.solar.is_some() {
            "par_w"
        } else {
            "par"
        }
    }

    /// Weights laid out in feature-row order.
    pub fn as_vec(&self) -> Vec<f64> {
        let mut w = self.ar.clone();
        w.push(self.persistence);
        w.extend(self.solar);
        w.extend(self.temperature);
        w
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        row.iter().zip(self.as_vec()).map(|(a, b)| a * b).sum()
    }
}

fn check_lag_history(g: usize, n_lags: usize, d: usize, pm: &PersistenceConfig) -> Result<()> {
    if g < n_lags {
        return Err(Error::history("samples before the slot", n_lags, g));
    }
    if d < pm.lookback_days() {
        return Err(Error::history("days before the target day", pm.lookback_days(), d));
    }
    Ok(())
}

fn par_features(values: &[f64], d: usize, t: usize, n_lags: usize, pm: &PersistenceConfig) -> Vec<f64> {
    let g = d * SLOTS_PER_DAY + t;
    let mut row: Vec<f64> = (1..=n_lags).map(|i| values[g - i]).collect();
    row.push(pm.predict_slot(values, d, t));
    row
}

/// Feature row `[y(g−1), …, y(g−n), ŷ_PM]` and target `y_d(t)` from measured values.
pub fn build_par_row(
    history: &LoadSeries,
    d: usize,
    t: usize,
    n_lags: usize,
    pm: &PersistenceConfig,
) -> Result<(Vec<f64>, f64)> {
    if t >= SLOTS_PER_DAY {
        return Err(Error::Range {
            what: "slot".into(),
            value: t,
            min: 0,
            max: SLOTS_PER_DAY - 1,
        });
    }
    if d >= history.n_days() {
        return Err(Error::history("days in history", d + 1, history.n_days()));
    }
    let g = d * SLOTS_PER_DAY + t;
    check_lag_history(g, n_lags, d, pm)?;
    let values = history.values();
    Ok((par_features(values, d, t, n_lags, pm), values[g]))
}

fn weather_value(w: &WeatherSeries, g: usize, temperature: bool) -> f64 {
    if temperature {
        w.temperature()[g]
    } else {
        w.solar()[g]
    }
}

fn training_days(first: usize, n_days: usize, train_days: usize) -> Result<Range<usize>> {
    let start = first.max(n_days.saturating_sub(train_days));
    if start >= n_days {
        return Err(Error::history("days in history", first + 1, n_days));
    }
    Ok(start..n_days)
}

/// Fits PAR (or PAR-W when `config.use_solar`) on the last `train_days` days.
pub fn fit_par(
    history: &LoadSeries,
    weather: Option<&WeatherSeries>,
    config: &ParConfig,
    train_days: usize,
) -> Result<ParWeights> {
    config.validate()?;
    let weather = if config.use_solar {
        let w = weather.ok_or_else(|| Error::Input("PAR-W requires weather data".into()))?;
        if w.n_days() < history.n_days() {
            return Err(Error::Coverage {
                day: history.n_days() - 1,
                available_days: w.n_days(),
            });
        }
        Some(w)
    } else {
        None
    };
    let days = training_days(config.first_day(), history.n_days(), train_days)?;
    let values = history.values();
    let mut rows = Vec::with_capacity(days.len() * SLOTS_PER_DAY);
    let mut targets = Vec::with_capacity(rows.capacity());
    for d in days {
        for t in 0..SLOTS_PER_DAY {
            let g = d * SLOTS_PER_DAY + t;
            let mut row = par_features(values, d, t, config.n_lags, &config.pm);
            if let Some(w) = weather {
                row.push(weather_value(w, g, false));
                if config.use_temperature {
                    row.push(weather_value(w, g, true));
                }
            }
            if values[g].is_finite() && row.iter().all(|v| v.is_finite()) {
                rows.push(row);
                targets.push(values[g]);
            }
        }
    }
    let w = fit_ols_rows(&rows, &targets, config.ridge)?;
    let n = config.n_lags;
    Ok(ParWeights {
        ar: w[..n].to_vec(),
        persistence: w[n],
        solar: config.use_solar.then(|| w[n + 1]),
        temperature: config.use_temperature.then(|| w[n + 2]),
        n_lags: n,
        pm: config.pm,
    })
}

fn forecast_recursive(
    weights: &ParWeights,
    history: &LoadSeries,
    weather: Option<&WeatherSeries>,
    d: usize,
) -> Result<DayForecast> {
    if weights.ar.len() != weights.n_lags {
        return Err(Error::shape(format!("{} AR weights", weights.n_lags), weights.ar.len()));
    }
    if history.n_days() < d {
        return Err(Error::history("days in history", d, history.n_days()));
    }
    check_lag_history(d * SLOTS_PER_DAY, weights.n_lags, d, &weights.pm)?;
    if let Some(w) = weather {
        if w.n_days() <= d {
            return Err(Error::Coverage {
                day: d,
                available_days: w.n_days(),
            });
        }
    }
    let origin = d * SLOTS_PER_DAY;
    let mut buf = history.values()[..origin].to_vec();
    let earliest = origin - weights.n_lags.max(weights.pm.lookback_days() * SLOTS_PER_DAY);
    if buf[earliest..].iter().any(|v| v.is_nan()) {
        return Err(Error::Input("history has missing samples in the lag window".into()));
    }
    for t in 0..SLOTS_PER_DAY {
        buf.push(0.0);
        let mut row = par_features(&buf, d, t, weights.n_lags, &weights.pm);
        if let Some(w) = weather {
            row.push(weather_value(w, origin + t, false));
            if weights.temperature.is_some() {
                row.push(weather_value(w, origin + t, true));
            }
        }
        buf[origin + t] = weights.predict_row(&row);
    }
    DayForecast::new(weights.model_id(), d, buf.split_off(origin))
}

/// Recursive 96-step PAR forecast for day `d`.
pub fn forecast_par(weights: &ParWeights, history: &LoadSeries, d: usize) -> Result<DayForecast> {
    if weights.solar.is_some() {
        return Err(Error::Input("weights include a solar term; use forecast_par_w".into()));
    }
    forecast_recursive(weights, history, None, d)
}

/// PAR forecast plus weather terms taken from `weather_forecast` on day `d`.
pub fn forecast_par_w(
    weights: &ParWeights,
    history: &LoadSeries,
    weather_forecast: &WeatherSeries,
    d: usize,
) -> Result<DayForecast> {
    if weights.solar.is_none() {
        return Err(Error::Input("weights have no solar term".into()));
    }
    forecast_recursive(weights, history, Some(weather_forecast), d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SprWindowConfig {
    pub rs_window_slots: usize,
    pub h_window_slots: usize,
    pub low_q: f64,
    pub high_q: f64,
}

impl Default for SprWindowConfig {
    fn default() -> Self {
        Self {
            rs_window_slots: 8,
            h_window_slots: 4,
            low_q: 0.25,
            high_q: 0.75,
        }
    }
}

impl SprWindowConfig {
    fn validate(&self) -> Result<()> {
        if self.rs_window_slots == 0 {
            return Err(Error::config("spr.rs_window_slots", "must be at least 1"));
        }
        if self.h_window_slots == 0 {
            return Err(Error::config("spr.h_window_slots", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.low_q) || !(0.0..=1.0).contains(&self.high_q) {
            return Err(Error::config("spr.low_q", "quantiles must lie in [0, 1]"));
        }
        if self.low_q > self.high_q {
            return Err(Error::config("spr.low_q", "must not exceed high_q"));
        }
        Ok(())
    }

    /// Samples needed before slot 0 of a source day.
    fn reach(&self) -> usize {
        SLOTS_PER_DAY
            .max(self.rs_window_slots - 1)
            .max(2 * self.h_window_slots - 1)
    }

    /// First target day for which every slot's features are defined.
    pub fn first_day(&self) -> usize {
        7 + self.reach().div_ceil(SLOTS_PER_DAY)
    }
}

/// Day-total thresholds for the low/high consumption flags.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SprThresholds {
    pub low: f64,
    pub high: f64,
}

/// Linear-interpolation sample quantile (R type 7) of unsorted data.
pub fn quantile(data: &[f64], q: f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("quantile of empty data".into()));
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Quantile thresholds over the totals of the complete days in `days`.
pub fn spr_thresholds(
    history: &LoadSeries,
    days: Range<usize>,
    windows: &SprWindowConfig,
) -> Result<SprThresholds> {
    windows.validate()?;
    let mut totals = Vec::with_capacity(days.len());
    for d in days {
        let day = history.day(d)?;
        if day.iter().all(|v| v.is_finite()) {
            totals.push(day.iter().sum::<f64>());
        }
    }
    Ok(SprThresholds {
        low: quantile(&totals, windows.low_q)?,
        high: quantile(&totals, windows.high_q)?,
    })
}

fn window_sum(values: &[f64], g: usize, w: usize) -> f64 {
    values[g + 1 - w..=g].iter().sum()
}

fn spr_features_raw(
    values: &[f64],
    calendar: &Calendar,
    d: usize,
    t: usize,
    windows: &SprWindowConfig,
    thresholds: &SprThresholds,
) -> [f64; SPR_FEATURES] {
    let hw = windows.h_window_slots;
    let mut f = [0.0; SPR_FEATURES];
    f[0] = calendar.day_type_of(d).flag();
    for (k, lag) in [1usize, 7].into_iter().enumerate() {
        let s = d - lag;
        let g = s * SLOTS_PER_DAY + t;
        let h = window_sum(values, g, hw);
        let total: f64 = values[s * SLOTS_PER_DAY..(s + 1) * SLOTS_PER_DAY].iter().sum();
        f[1 + k] = values[g];
        f[3 + k] = window_sum(values, g, windows.rs_window_slots);
        f[5 + k] = h;
        f[7 + k] = values[g] - values[g - SLOTS_PER_DAY];
        f[9 + k] = h - window_sum(values, g - hw, hw);
        f[11 + k] = f64::from(u8::from(total < thresholds.low));
        f[13 + k] = f64::from(u8::from(total > thresholds.high));
    }
    f
}

/// The 15 SPR regressors for target day `d`, slot `t`, in the order
/// `f_d, y, y_rs, y_h, y_dd, y_dh, low, high` with each measured term given
/// for day `d−1` then day `d−7`.
pub fn build_spr_features(
    history: &LoadSeries,
    calendar: &Calendar,
    d: usize,
    t: usize,
    windows: &SprWindowConfig,
    thresholds: &SprThresholds,
) -> Result<[f64; SPR_FEATURES]> {
    windows.validate()?;
    if t >= SLOTS_PER_DAY {
        return Err(Error::Range {
            what: "slot".into(),
            value: t,
            min: 0,
            max: SLOTS_PER_DAY - 1,
        });
    }
    let first = windows.first_day();
    if d < first {
        return Err(Error::history("days before the target day", first, d));
    }
    if history.n_days() < d {
        return Err(Error::history("days in history", d, history.n_days()));
    }
    let f = spr_features_raw(history.values(), calendar, d, t, windows, thresholds);
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input(format!("missing samples behind day {d} slot {t}")));
    }
    Ok(f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SprModel {
    pub weights: [f64; SPR_FEATURES],
    pub thresholds: SprThresholds,
    pub windows: SprWindowConfig,
}

/// SPR training rows for the last `train_days` days, with the thresholds
/// computed from the same window. Rows with missing values are dropped.
pub(crate) fn spr_training_set(
    history: &LoadSeries,
    calendar: &Calendar,
    windows: &SprWindowConfig,
    train_days: usize,
) -> Result<(Vec<[f64; SPR_FEATURES]>, Vec<f64>, SprThresholds)> {
    windows.validate()?;
    let days = training_days(windows.first_day(), history.n_days(), train_days)?;
    let thresholds = spr_thresholds(history, days.clone(), windows)?;
    let values = history.values();
    let mut rows = Vec::with_capacity(days.len() * SLOTS_PER_DAY);
    let mut targets = Vec::with_capacity(rows.capacity());
    for d in days {
        for t in 0..SLOTS_PER_DAY {
            let y = values[d * SLOTS_PER_DAY + t];
            let f = spr_features_raw(values, calendar, d, t, windows, &thresholds);
            if y.is_finite() && f.iter().all(|v| v.is_finite()) {
                rows.push(f);
                targets.push(y);
            }
        }
    }
    Ok((rows, targets, thresholds))
}

/// Fits SPR weights on the last `train_days` days. Thresholds come from the
/// day totals of the same window.
pub fn fit_spr(
    history: &LoadSeries,
    calendar: &Calendar,
    windows: &SprWindowConfig,
    train_days: usize,
    ridge: f64,
) -> Result<SprModel> {
    let (rows, targets, thresholds) = spr_training_set(history, calendar, windows, train_days)?;
    let w = fit_ols_rows(&rows, &targets, ridge)?;
    let mut weights = [0.0; SPR_FEATURES];
    weights.copy_from_slice(&w);
    Ok(SprModel {
        weights,
        thresholds,
        windows: windows.clone(),
    })
}

/// Non-recursive SPR forecast for day `d`.
pub fn forecast_spr(
    model: &SprModel,
    history: &LoadSeries,
    calendar: &Calendar,
    d: usize,
) -> Result<DayForecast> {
    let values = (0..SLOTS_PER_DAY)
        .map(|t| {
            let f = build_spr_features(history, calendar, d, t, &model.windows, &model.thresholds)?;
            Ok(f.iter().zip(&model.weights).map(|(a, b)| a * b).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    DayForecast::new("spr", d, values)
}
