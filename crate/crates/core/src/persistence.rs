//! Baseline persistence forecasters: the average of the same weekday over the
//! last `n` weeks, and the average of the last `n` consecutive days.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::DayForecast;
use crate::series::{LoadSeries, SLOTS_PER_DAY};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersistenceVariant {
    SameDays,
    ConsecutiveDays,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersistenceConfig {
    pub n: usize,
    pub variant: PersistenceVariant,
}

impl PersistenceConfig {
    pub const DEFAULT_SAME_DAYS_N: usize = 4;
    pub const DEFAULT_CONSECUTIVE_N: usize = 3;

    pub fn same_days(n: usize) -> Self {
        Self {
            n,
            variant: PersistenceVariant::SameDays,
        }
    }

    pub fn consecutive_days(n: usize) -> Self {
        Self {
            n,
            variant: PersistenceVariant::ConsecutiveDays,
        }
    }

    /// Days between the target and the oldest day used.
    pub fn lookback_days(&self) -> usize {
        match self.variant {
            PersistenceVariant::SameDays => 7 * self.n,
            PersistenceVariant::ConsecutiveDays => self.n,
        }
    }

    pub fn model_id(&self) -> &'static str {
        match self.variant {
            PersistenceVariant::SameDays => "n_same_days",
            PersistenceVariant::ConsecutiveDays => "n_days",
        }
    }

    /// Forecast values for day `d`.
    pub fn predict(&self, history: &LoadSeries, d: usize) -> Result<Vec<f64>> {
        if self.n == 0 {
            return Err(Error::config("persistence.n", "must be at least 1"));
        }
        let stride = match self.variant {
            PersistenceVariant::SameDays => 7,
            PersistenceVariant::ConsecutiveDays => 1,
        };
        let lookback = stride * self.n;
        if d < lookback {
            return Err(Error::history("days before the target day", lookback, d));
        }
        if d - stride >= history.n_days() {
            return Err(Error::history(
                "days in history",
                d - stride + 1,
                history.n_days(),
            ));
        }
        let mut acc = vec![0.0; SLOTS_PER_DAY];
        for k in 1..=self.n {
            let day = history.day(d - stride * k)?;
            if day.iter().any(|v| v.is_nan()) {
                return Err(Error::Input(format!(
                    "day {} has missing samples",
                    d - stride * k
                )));
            }
            for (a, v) in acc.iter_mut().zip(day) {
                *a += v;
            }
        }
        let n = self.n as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(acc)
    }

    /// Persistence value at a single `(d, t)`; same arithmetic as [`Self::predict`].
    pub(crate) fn predict_slot(&self, history: &[f64], d: usize, t: usize) -> f64 {
        let stride = match self.variant {
            PersistenceVariant::SameDays => 7,
            PersistenceVariant::ConsecutiveDays => 1,
        };
        let mut acc = 0.0;
        for k in 1..=self.n {
            acc += history[(d - stride * k) * SLOTS_PER_DAY + t];
        }
        acc / self.n as f64
    }
}

/// Average of the same weekday over the previous `n` weeks.
pub fn forecast_n_same_days(history: &LoadSeries, n: usize, d: usize) -> Result<DayForecast> {
    let cfg = PersistenceConfig::same_days(n);
    DayForecast::new(cfg.model_id(), d, cfg.predict(history, d)?)
}

/// Average of the previous `n` consecutive days.
pub fn forecast_n_days(history: &LoadSeries, n: usize, d: usize) -> Result<DayForecast> {
    let cfg = PersistenceConfig::consecutive_days(n);
    DayForecast::new(cfg.model_id(), d, cfg.predict(history, d)?)
}
