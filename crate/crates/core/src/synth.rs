//! Seeded generator of synthetic prosumer-community load and weather data.
//!
//! The random stream is SplitMix64 seeded with `SynthConfig::seed`. Uniforms
//! take the top 53 bits of each output (`(x >> 11) · 2⁻⁵³`); normals use the
//! cosine branch of Box–Muller on two consecutive uniforms, with the first
//! mapped to `(0, 1]`. Draw order:
//!
//! 1. per day: cloud clearness `0.35 + 0.65·u`, then temperature anomaly `2·z`,
//!    then (only when `intraday_cloud > 0`) 24 hourly cloud factors
//!    `1 − intraday_cloud·u`;
//! 2. per building: base load `0.2 + 0.2·u`, morning amplitude `0.8 + 0.6·u`,
//!    evening amplitude `1.2 + 0.8·u`;
//! 3. per building, per sample in time order: noise `noise_sd · z` (only when
//!    `noise_sd > 0`).
//!
//! Building load at day `d`, slot `t` is
//! `max(0, profile(t)·scale(d) + weather_coupling·solar(d,t)/1000 + noise)`
//! where `profile` is the base plus two Gaussian bumps (sd 6 slots) centred
//! on the morning and evening peak slots, and `scale(d)` is
//! `weekend_scale` on Saturdays/Sundays and 1 otherwise. Solar radiation is a
//! half-sine between 06:00 and 18:00 whose peak follows the season and the
//! day's clearness, multiplied by the hourly cloud factor; it is exactly zero
//! at night.

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate, Weekday};
use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{aggregate_community, LoadSeries, WeatherSeries, SLOTS_PER_DAY};

const PEAK_SD_SLOTS: f64 = 6.0;
const SUNRISE_SLOT: usize = 24;
const SUNSET_SLOT: usize = 72;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_buildings: usize,
    pub n_days: usize,
    pub seed: u64,
    pub morning_peak_slot: usize,
    pub evening_peak_slot: usize,
    pub weekend_scale: f64,
    /// Standard deviation of the i.i.d. Gaussian noise, kW.
    pub noise_sd: f64,
    /// kW per kW/m² of solar radiation; negative for PV prosumers.
    pub weather_coupling: f64,
    /// Depth of hour-to-hour cloud dimming in [0, 1]; 0 keeps each day's
    /// solar curve smooth.
    pub intraday_cloud: f64,
    pub start_date: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_buildings: 3,
            n_days: 366,
            seed: 2016,
            morning_peak_slot: 32,
            evening_peak_slot: 72,
            weekend_scale: 0.8,
            noise_sd: 0.1,
            weather_coupling: -1.0,
            intraday_cloud: 0.0,
            start_date: NaiveDate::from_ymd_opt(2016, 1, 1).expect("valid constant date"),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_buildings < 1 {
            return Err(Error::config("synth.n_buildings", "must be at least 1"));
        }
        if self.n_days < 14 {
            return Err(Error::config("synth.n_days", "must be at least 14"));
        }
        for (key, slot) in [
            ("synth.morning_peak_slot", self.morning_peak_slot),
            ("synth.evening_peak_slot", self.evening_peak_slot),
        ] {
            if slot >= SLOTS_PER_DAY {
                return Err(Error::config(key, "must be in 0..=95"));
            }
        }
        if !(self.weekend_scale > 0.0 && self.weekend_scale.is_finite()) {
            return Err(Error::config("synth.weekend_scale", "must be > 0"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::config("synth.noise_sd", "must be >= 0"));
        }
        if !self.weather_coupling.is_finite() {
            return Err(Error::config("synth.weather_coupling", "must be finite"));
        }
        if !(0.0..=1.0).contains(&self.intraday_cloud) {
            return Err(Error::config("synth.intraday_cloud", "must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Generated buildings and their shared weather.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub buildings: Vec<LoadSeries>,
    pub weather: WeatherSeries,
}

impl SynthData {
    /// Pointwise sum of all buildings.
    pub fn community(&self) -> LoadSeries {
        aggregate_community(&self.buildings).expect("generated buildings are aligned and gap-free")
    }
}

struct Stream(SplitMix64);

impl Stream {
    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

fn seasonal_phase(date: NaiveDate) -> f64 {
    (2.0 * PI * (date.ordinal0() as f64 + 10.0) / 365.0).cos()
}

fn bump(t: usize, centre: usize) -> f64 {
    let z = (t as f64 - centre as f64) / PEAK_SD_SLOTS;
    (-0.5 * z * z).exp()
}

pub fn generate(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let mut rng = Stream(SplitMix64::seed_from_u64(config.seed));
    let n = config.n_days * SLOTS_PER_DAY;
    let dates: Vec<NaiveDate> = (0..config.n_days)
        .map(|d| config.start_date + chrono::Duration::days(d as i64))
        .collect();

    let mut solar = vec![0.0; n];
    let mut temperature = vec![0.0; n];
    for (d, date) in dates.iter().enumerate() {
        let clearness = 0.35 + 0.65 * rng.uniform();
        let anomaly = 2.0 * rng.normal();
        let mut hourly = [1.0; 24];
        if config.intraday_cloud > 0.0 {
            for f in &mut hourly {
                *f = 1.0 - config.intraday_cloud * rng.uniform();
            }
        }
        let season = seasonal_phase(*date);
        let peak = (500.0 - 350.0 * season) * clearness;
        for t in 0..SLOTS_PER_DAY {
            let i = d * SLOTS_PER_DAY + t;
            if (SUNRISE_SLOT..SUNSET_SLOT).contains(&t) {
                let x = (t - SUNRISE_SLOT) as f64 / (SUNSET_SLOT - SUNRISE_SLOT) as f64;
                solar[i] = peak * hourly[t / 4] * (PI * x).sin();
            }
            let diurnal = (2.0 * PI * (t as f64 - 36.0) / SLOTS_PER_DAY as f64).sin();
            temperature[i] = 10.0 - 10.0 * season + 4.0 * diurnal + anomaly;
        }
    }

    let shapes: Vec<[f64; 3]> = (0..config.n_buildings)
        .map(|_| {
            [
                0.2 + 0.2 * rng.uniform(),
                0.8 + 0.6 * rng.uniform(),
                1.2 + 0.8 * rng.uniform(),
            ]
        })
        .collect();

    let start = config
        .start_date
        .and_hms_opt(0, 0, 0)
        .expect("midnight is valid");
    let mut buildings = Vec::with_capacity(config.n_buildings);
    for [base, morning, evening] in shapes {
        let profile: Vec<f64> = (0..SLOTS_PER_DAY)
            .map(|t| {
                base + morning * bump(t, config.morning_peak_slot)
                    + evening * bump(t, config.evening_peak_slot)
            })
            .collect();
        let mut values = Vec::with_capacity(n);
        for (d, date) in dates.iter().enumerate() {
            let scale = match date.weekday() {
                Weekday::Sat | Weekday::Sun => config.weekend_scale,
                _ => 1.0,
            };
            for (t, p) in profile.iter().enumerate() {
                let i = d * SLOTS_PER_DAY + t;
                let mut y = p * scale + config.weather_coupling * solar[i] / 1000.0;
                if config.noise_sd > 0.0 {
                    y += config.noise_sd * rng.normal();
                }
                values.push(y.max(0.0));
            }
        }
        buildings.push(LoadSeries::new(start, values)?);
    }
    let weather = WeatherSeries::new(start, solar, temperature)?;
    Ok(SynthData { buildings, weather })
}
