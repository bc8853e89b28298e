//! Additive Fourier model: piecewise-linear trend, Fourier seasonalities and
//! holiday indicators, fitted by (ridge) least squares. Point forecasts only.
//!
//! The time index `t` is the global slot index of the series the model was
//! fitted on, so seasonal phases line up across fit and forecast.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::ops::Range;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::DayForecast;
use crate::ols::fit_ols;
use crate::series::{LoadSeries, SLOTS_PER_DAY};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GamConfig {
    /// Slot indices where the trend slope may change.
    pub changepoints: Vec<usize>,
    /// Seasonal periods in slots; paired element-wise with `orders`.
    pub periods: Vec<usize>,
    pub orders: Vec<usize>,
    pub holidays: BTreeSet<NaiveDate>,
    pub ridge: f64,
}

impl Default for GamConfig {
    fn default() -> Self {
        Self {
            changepoints: Vec::new(),
            periods: vec![SLOTS_PER_DAY, 7 * SLOTS_PER_DAY],
            orders: vec![10, 3],
            holidays: BTreeSet::new(),
            ridge: 0.0,
        }
    }
}

impl GamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.periods.len() != self.orders.len() {
            return Err(Error::config(
                "gam.orders",
                format!("{} orders for {} periods", self.orders.len(), self.periods.len()),
            ));
        }
        if self.periods.iter().any(|&p| p < 2) {
            return Err(Error::config("gam.periods", "every period must be at least 2"));
        }
        if self.orders.iter().any(|&n| n < 1) {
            return Err(Error::config("gam.orders", "every order must be at least 1"));
        }
        if self.changepoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("gam.changepoints", "must be strictly increasing"));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::config("gam.ridge", "must be >= 0"));
        }
        Ok(())
    }

    fn seasonalities(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.periods.iter().copied().zip(self.orders.iter().copied())
    }

    fn n_fourier(&self) -> usize {
        self.orders.iter().map(|n| 2 * n).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GamParams {
    pub intercept: f64,
    pub slope: f64,
    pub slope_deltas: Vec<f64>,
    /// `(a_n, b_n)` pairs, seasonality by seasonality, `n` ascending.
    pub fourier_coeffs: Vec<(f64, f64)>,
    pub holiday_effects: BTreeMap<NaiveDate, f64>,
    pub noise_sd: f64,
    /// Date of slot index 0.
    pub origin: NaiveDate,
}

fn holiday_dates_in(
    holidays: &BTreeSet<NaiveDate>,
    origin: NaiveDate,
    slots: &Range<usize>,
) -> Vec<NaiveDate> {
    if slots.is_empty() {
        return Vec::new();
    }
    let first = origin + chrono::Duration::days((slots.start / SLOTS_PER_DAY) as i64);
    let last = origin + chrono::Duration::days(((slots.end - 1) / SLOTS_PER_DAY) as i64);
    holidays.range(first..=last).copied().collect()
}

fn fill_row(
    row: &mut [f64],
    t: usize,
    config: &GamConfig,
    origin: NaiveDate,
    holidays: &[NaiveDate],
) {
    let tf = t as f64;
    row[0] = 1.0;
    row[1] = tf;
    let mut j = 2;
    for &c in &config.changepoints {
        row[j] = (tf - c as f64).max(0.0);
        j += 1;
    }
    for (p, n) in config.seasonalities() {
        let phase = (t % p) as f64 / p as f64;
        for k in 1..=n {
            let x = 2.0 * PI * k as f64 * phase;
            row[j] = x.cos();
            row[j + 1] = x.sin();
            j += 2;
        }
    }
    let date = origin + chrono::Duration::days((t / SLOTS_PER_DAY) as i64);
    for h in holidays {
        row[j] = f64::from(u8::from(*h == date));
        j += 1;
    }
}

/// Design matrix over the slot indices `slots`. Holiday columns are created
/// only for holidays falling inside the range, in date order.
pub fn build_design_matrix(
    slots: Range<usize>,
    config: &GamConfig,
    origin: NaiveDate,
) -> Result<DMatrix<f64>> {
    config.validate()?;
    if slots.is_empty() {
        return Err(Error::Input("empty time range".into()));
    }
    let holidays = holiday_dates_in(&config.holidays, origin, &slots);
    let cols = 2 + config.changepoints.len() + config.n_fourier() + holidays.len();
    let mut x = DMatrix::zeros(slots.len(), cols);
    let mut row = vec![0.0; cols];
    for (i, t) in slots.enumerate() {
        fill_row(&mut row, t, config, origin, &holidays);
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }
    Ok(x)
}

/// Fits on the slots of days `days` of `series`; missing samples are skipped.
pub fn fit_gam(series: &LoadSeries, config: &GamConfig, days: Range<usize>) -> Result<GamParams> {
    config.validate()?;
    if days.end > series.n_days() {
        return Err(Error::history("days in series", days.end, series.n_days()));
    }
    let slots = days.start * SLOTS_PER_DAY..days.end * SLOTS_PER_DAY;
    if let Some(&c) = config
        .changepoints
        .iter()
        .find(|&&c| !slots.contains(&c))
    {
        return Err(Error::config(
            "gam.changepoints",
            format!("changepoint {c} lies outside the training range {slots:?}"),
        ));
    }
    let origin = series.date_of_day(0);
    let holidays = holiday_dates_in(&config.holidays, origin, &slots);
    let values = series.values();
    let present: Vec<usize> = slots.clone().filter(|&t| values[t].is_finite()).collect();
    let cols = 2 + config.changepoints.len() + config.n_fourier() + holidays.len();
    if present.len() <= cols {
        return Err(Error::history("observed samples", cols + 1, present.len()));
    }
    let mut x = DMatrix::zeros(present.len(), cols);
    let mut row = vec![0.0; cols];
    for (i, &t) in present.iter().enumerate() {
        fill_row(&mut row, t, config, origin, &holidays);
        for (j, v) in row.iter().enumerate() {
            x[(i, j)] = *v;
        }
    }
    let y: Vec<f64> = present.iter().map(|&t| values[t]).collect();
    let w = fit_ols(&x, &y, config.ridge).map_err(|e| match e {
        Error::Singular(m) => Error::Singular(format!("{m}; set gam.ridge > 0")),
        other => other,
    })?;

    let fitted = &x * nalgebra::DVector::from_column_slice(&w);
    let sse: f64 = fitted.iter().zip(&y).map(|(f, v)| (v - f).powi(2)).sum();
    let noise_sd = (sse / (y.len() - cols) as f64).sqrt();

    let nc = config.changepoints.len();
    let nf = config.n_fourier();
    let fourier = &w[2 + nc..2 + nc + nf];
    Ok(GamParams {
        intercept: w[0],
        slope: w[1],
        slope_deltas: w[2..2 + nc].to_vec(),
        fourier_coeffs: fourier.chunks(2).map(|c| (c[0], c[1])).collect(),
        holiday_effects: holidays.into_iter().zip(w[2 + nc + nf..].iter().copied()).collect(),
        noise_sd,
        origin,
    })
}

/// Deterministic part `g(t) + s(t) + h(t)` at slot index `t`.
pub fn gam_value(params: &GamParams, config: &GamConfig, t: usize) -> Result<f64> {
    if params.slope_deltas.len() != config.changepoints.len()
        || params.fourier_coeffs.len() * 2 != config.n_fourier()
    {
        return Err(Error::shape(
            "parameters matching the configuration",
            params.fourier_coeffs.len() * 2,
        ));
    }
    let tf = t as f64;
    let mut v = params.intercept + params.slope * tf;
    for (c, delta) in config.changepoints.iter().zip(&params.slope_deltas) {
        v += delta * (tf - *c as f64).max(0.0);
    }
    let mut coeffs = params.fourier_coeffs.iter();
    for (p, n) in config.seasonalities() {
        let phase = (t % p) as f64 / p as f64;
        for k in 1..=n {
            let (a, b) = coeffs.next().expect("length checked above");
            let x = 2.0 * PI * k as f64 * phase;
            v += a * x.cos() + b * x.sin();
        }
    }
    let date = params.origin + chrono::Duration::days((t / SLOTS_PER_DAY) as i64);
    if let Some(effect) = params.holiday_effects.get(&date) {
        v += effect;
    }
    Ok(v)
}

/// Point forecast for day `d` (disturbance set to zero).
pub fn forecast_gam(params: &GamParams, config: &GamConfig, d: usize) -> Result<DayForecast> {
    let values = (d * SLOTS_PER_DAY..(d + 1) * SLOTS_PER_DAY)
        .map(|t| gam_value(params, config, t))
        .collect::<Result<Vec<_>>>()?;
    DayForecast::new("gam_fourier", d, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn origin() -> NaiveDate {
        NaiveDate::from_ymd_opt(2016, 1, 1).unwrap()
    }

    fn daily(orders: usize) -> GamConfig {
        GamConfig {
            periods: vec![SLOTS_PER_DAY],
            orders: vec![orders],
            ..GamConfig::default()
        }
    }

    fn planted(t: usize) -> f64 {
        let x = 2.0 * PI * t as f64 / 96.0;
        2.0 + 0.5 * x.cos() + 0.25 * (3.0 * x).sin()
    }

    #[test]
    fn column_census() {
        let cfg = GamConfig {
            periods: vec![4],
            orders: vec![1],
            ..GamConfig::default()
        };
        let x = build_design_matrix(0..8, &cfg, origin()).unwrap();
        assert_eq!(x.ncols(), 4);
        assert_eq!(x[(3, 1)], 3.0);
        assert!((x[(1, 2)]).abs() < 1e-15 && (x[(1, 3)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn holiday_column_mass() {
        let cfg = GamConfig {
            holidays: [
                NaiveDate::from_ymd_opt(2016, 1, 2).unwrap(),
                NaiveDate::from_ymd_opt(2016, 1, 4).unwrap(),
                NaiveDate::from_ymd_opt(2016, 3, 1).unwrap(),
            ]
            .into(),
            ..daily(1)
        };
        let x = build_design_matrix(0..5 * SLOTS_PER_DAY, &cfg, origin()).unwrap();
        assert_eq!(x.ncols(), 2 + 2 + 2);
        for j in 4..6 {
            assert_eq!(x.column(j).sum(), 96.0);
        }
    }

    #[test]
    fn fourier_columns_orthogonal_over_full_periods() {
        let x = build_design_matrix(0..7 * SLOTS_PER_DAY, &GamConfig::default(), origin()).unwrap();
        for i in 2..x.ncols() {
            for j in (i + 1)..x.ncols() {
                let dot = x.column(i).dot(&x.column(j));
                assert!(dot.abs() < 1e-8 * x.column(i).norm() * x.column(j).norm(), "{i},{j}");
            }
        }
    }

    #[test]
    fn planted_recovery_noiseless() {
        let s = LoadSeries::from_values((0..30 * SLOTS_PER_DAY).map(planted).collect()).unwrap();
        let p = fit_gam(&s, &daily(3), 0..30).unwrap();
        assert!((p.intercept - 2.0).abs() < 1e-6);
        assert!(p.slope.abs() < 1e-6);
        let expected = [(0.5, 0.0), (0.0, 0.0), (0.0, 0.25)];
        for (got, want) in p.fourier_coeffs.iter().zip(expected) {
            assert!((got.0 - want.0).abs() < 1e-6 && (got.1 - want.1).abs() < 1e-6);
        }
        let f = forecast_gam(&p, &daily(3), 30).unwrap();
        let rmse = (f
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (v - planted(30 * 96 + i)).powi(2))
            .sum::<f64>()
            / 96.0)
            .sqrt();
        assert!(rmse < 1e-4);
    }

    #[test]
    fn planted_recovery_with_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2016);
        let noise = rand_distr::Normal::new(0.0, 0.1).unwrap();
        let s = LoadSeries::from_values(
            (0..60 * SLOTS_PER_DAY)
                .map(|t| planted(t) + rng.sample(noise))
                .collect(),
        )
        .unwrap();
        let p = fit_gam(&s, &daily(3), 0..60).unwrap();
        assert!((p.intercept - 2.0).abs() < 0.02);
        assert!((p.fourier_coeffs[0].0 - 0.5).abs() < 0.02);
        assert!((p.fourier_coeffs[2].1 - 0.25).abs() < 0.02);
        assert!((p.noise_sd - 0.1).abs() < 0.01);
    }

    #[test]
    fn constant_series() {
        let s = LoadSeries::from_values(vec![4.0; 14 * SLOTS_PER_DAY]).unwrap();
        let p = fit_gam(&s, &GamConfig::default(), 0..14).unwrap();
        assert!((p.intercept - 4.0).abs() < 1e-8);
        assert!(p.slope.abs() < 1e-8);
        assert!(p.fourier_coeffs.iter().all(|(a, b)| a.abs() < 1e-8 && b.abs() < 1e-8));
    }

    #[test]
    fn intercept_only_is_flat() {
        let cfg = daily(2);
        let p = GamParams {
            intercept: 1.5,
            slope: 0.0,
            slope_deltas: vec![],
            fourier_coeffs: vec![(0.0, 0.0); 2],
            holiday_effects: BTreeMap::new(),
            noise_sd: 0.0,
            origin: origin(),
        };
        assert!(forecast_gam(&p, &cfg, 9).unwrap().values.iter().all(|&v| v == 1.5));
    }

    #[test]
    fn periodic_without_trend() {
        let cfg = GamConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = GamParams {
            intercept: 1.0,
            slope: 0.0,
            slope_deltas: vec![],
            fourier_coeffs: (0..13).map(|_| (rng.random(), rng.random())).collect(),
            holiday_effects: BTreeMap::new(),
            noise_sd: 0.0,
            origin: origin(),
        };
        for d in 1..8 {
            let a = forecast_gam(&p, &cfg, d).unwrap();
            let b = forecast_gam(&p, &cfg, d + 7).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x - y).abs() < 1e-9);
            }
        }
        let p1 = GamParams {
            fourier_coeffs: p.fourier_coeffs[..10].to_vec(),
            ..p.clone()
        };
        let d1 = daily(10);
        assert_eq!(forecast_gam(&p1, &d1, 3).unwrap().values, forecast_gam(&p1, &d1, 4).unwrap().values);
    }

    #[test]
    fn trend_extrapolates_final_slope() {
        let cp = 10 * SLOTS_PER_DAY;
        let s = LoadSeries::from_values(
            (0..20 * SLOTS_PER_DAY)
                .map(|t| 1.0 + 0.001 * t as f64 + 0.002 * (t as f64 - cp as f64).max(0.0))
                .collect(),
        )
        .unwrap();
        let cfg = GamConfig {
            changepoints: vec![cp],
            ..daily(1)
        };
        let p = fit_gam(&s, &cfg, 0..20).unwrap();
        let f = forecast_gam(&p, &cfg, 20).unwrap();
        let t = 20 * SLOTS_PER_DAY + 50;
        let want = 1.0 + 0.001 * t as f64 + 0.002 * (t - cp) as f64;
        assert!((f.values[50] - want).abs() < 1e-6);
    }

    #[test]
    fn holiday_effect_recovered_and_applied() {
        let hol = NaiveDate::from_ymd_opt(2016, 1, 6).unwrap();
        let s = LoadSeries::from_values(
            (0..14 * SLOTS_PER_DAY)
                .map(|t| planted(t) - if t / 96 == 5 { 0.7 } else { 0.0 })
                .collect(),
        )
        .unwrap();
        let cfg = GamConfig {
            holidays: [hol].into(),
            ..daily(3)
        };
        let p = fit_gam(&s, &cfg, 0..14).unwrap();
        assert!((p.holiday_effects[&hol] + 0.7).abs() < 1e-6);
        let f = forecast_gam(&p, &cfg, 5).unwrap();
        assert!((f.values[0] - (planted(480) - 0.7)).abs() < 1e-6);
    }

    #[test]
    fn row_order_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = daily(3);
        let x = build_design_matrix(0..10 * 96, &cfg, origin()).unwrap();
        let y: Vec<f64> = (0..960).map(|t| planted(t) + rng.random_range(-0.1..0.1)).collect();
        let w = fit_ols(&x, &y, 0.0).unwrap();
        let mut perm: Vec<usize> = (0..960).collect();
        perm.reverse();
        perm.swap(3, 500);
        let xp = DMatrix::from_fn(960, x.ncols(), |i, j| x[(perm[i], j)]);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let wp = fit_ols(&xp, &yp, 0.0).unwrap();
        for (a, b) in w.iter().zip(&wp) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn changepoint_outside_range_rejected() {
        let s = LoadSeries::from_values(vec![1.0; 10 * SLOTS_PER_DAY]).unwrap();
        let cfg = GamConfig {
            changepoints: vec![5000],
            ..daily(1)
        };
        assert!(matches!(fit_gam(&s, &cfg, 0..10), Err(Error::Config { .. })));
    }
}
