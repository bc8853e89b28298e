//! Model registry: declarative model specs, fitting on a truncated data view
//! and day-ahead forecasting through one interface.
//!
//! A [`DataView`] for target day `d` holds the load through day `d − 1`, the
//! weather through day `d` (the weather forecast of the target day) and the
//! calendar. Models never see anything else, which is what makes forecasts
//! causal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::DayForecast;
use crate::gam::{fit_gam, forecast_gam, GamConfig, GamParams};
use crate::holt_winters::{hw_filter, hw_fit, hw_forecast, HwFitConfig, HwParams};
use crate::neural::checkpoint::{decode_lstm, encode_lstm, Checkpoint, MAGIC};
use crate::neural::spnn::{decode_spnn, encode_spnn};
use crate::neural::{fit_spnn, forecast_spnn, lstm_forecast, lstm_train, LstmConfig, LstmParams, SpnnConfig, SpnnModel};
use crate::persistence::PersistenceConfig;
use crate::regression::{
    fit_par, fit_spr, forecast_par, forecast_par_w, forecast_spr, ParConfig, ParWeights, SprModel,
    SprWindowConfig, DEFAULT_RIDGE,
};
use crate::sarima::{fit_sarima, forecast_sarima, select_order, SarimaFitOptions, SarimaOrder, SarimaParams};
use crate::series::{Calendar, LoadSeries, WeatherSeries, SLOTS_PER_DAY};

/// Every registered model id, in display order.
pub const MODEL_IDS: [&str; 11] = [
    "oracle",
    "n_same_days",
    "n_days",
    "hw",
    "sarima",
    "par",
    "par_w",
    "spr",
    "spnn",
    "lstm",
    "gam_fourier",
];

/// What a model may look at when forecasting `target_day()`.
#[derive(Clone, Debug)]
pub struct DataView {
    pub load: LoadSeries,
    pub weather: Option<WeatherSeries>,
    pub calendar: Calendar,
}

impl DataView {
    /// View for target day `d`: load days `0..d`, weather days `0..=d`.
    pub fn truncated(
        load: &LoadSeries,
        weather: Option<&WeatherSeries>,
        calendar: &Calendar,
        d: usize,
    ) -> Result<Self> {
        if d == 0 || d > load.n_days() {
            return Err(Error::Range {
                what: "target day",
                value: d,
                min: 1,
                max: load.n_days(),
            });
        }
        Ok(Self {
            load: load.prefix_days(d),
            weather: weather.map(|w| w.prefix_days((d + 1).min(w.n_days()))),
            calendar: calendar.clone(),
        })
    }

    pub fn target_day(&self) -> usize {
        self.load.n_days()
    }

    fn weather(&self) -> Result<&WeatherSeries> {
        self.weather
            .as_ref()
            .ok_or_else(|| Error::Input("this model requires weather data".into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersistenceSpec {
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SarimaSpec {
    pub order: SarimaOrder,
    /// When non-empty, the order is chosen from these by AIC at every refit
    /// and `order` is ignored.
    pub candidates: Vec<SarimaOrder>,
    /// Upper bound on the fitting window.
    pub max_train_days: usize,
    pub fit: SarimaFitOptions,
}

impl Default for SarimaSpec {
    fn default() -> Self {
        Self {
            order: SarimaOrder::new(1, 1, 1, 1, 1, 1, SLOTS_PER_DAY).expect("valid constant order"),
            candidates: Vec::new(),
            max_train_days: 14,
            fit: SarimaFitOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SprSpec {
    pub rs_window_slots: usize,
    pub h_window_slots: usize,
    pub low_q: f64,
    pub high_q: f64,
    pub ridge: f64,
}

impl Default for SprSpec {
    fn default() -> Self {
        let w = SprWindowConfig::default();
        Self {
            rs_window_slots: w.rs_window_slots,
            h_window_slots: w.h_window_slots,
            low_q: w.low_q,
            high_q: w.high_q,
            ridge: DEFAULT_RIDGE,
        }
    }
}

impl SprSpec {
    pub fn windows(&self) -> SprWindowConfig {
        SprWindowConfig {
            rs_window_slots: self.rs_window_slots,
            h_window_slots: self.h_window_slots,
            low_q: self.low_q,
            high_q: self.high_q,
        }
    }
}

/// A model and its hyperparameters, tagged by model id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Returns the actual target day. A test fixture for the evaluation
    /// harness, which supplies the answer; it is not causal.
    Oracle,
    NSameDays(PersistenceSpec),
    NDays(PersistenceSpec),
    Hw(HwFitConfig),
    Sarima(SarimaSpec),
    Par(ParConfig),
    /// PAR with the solar term; `use_solar` is implied.
    ParW(ParConfig),
    Spr(SprSpec),
    Spnn(SpnnConfig),
    Lstm(LstmConfig),
    GamFourier(GamConfig),
}

impl ModelSpec {
    /// The spec with default hyperparameters for `id`.
    pub fn default_for(id: &str) -> Result<Self> {
        Ok(match id {
            "oracle" => Self::Oracle,
            "n_same_days" => Self::NSameDays(PersistenceSpec {
                n: PersistenceConfig::DEFAULT_SAME_DAYS_N,
            }),
            "n_days" => Self::NDays(PersistenceSpec {
                n: PersistenceConfig::DEFAULT_CONSECUTIVE_N,
            }),
            "hw" => Self::Hw(HwFitConfig::default()),
            "sarima" => Self::Sarima(SarimaSpec::default()),
            "par" => Self::Par(ParConfig::default()),
            "par_w" => Self::ParW(ParConfig::with_weather()),
            "spr" => Self::Spr(SprSpec::default()),
            "spnn" => Self::Spnn(SpnnConfig::default()),
            "lstm" => Self::Lstm(LstmConfig::default()),
            "gam_fourier" => Self::GamFourier(GamConfig::default()),
            _ => return Err(unknown_model(id)),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::NSameDays(_) => "n_same_days",
            Self::NDays(_) => "n_days",
            Self::Hw(_) => "hw",
            Self::Sarima(_) => "sarima",
            Self::Par(_) => "par",
            Self::ParW(_) => "par_w",
            Self::Spr(_) => "spr",
            Self::Spnn(_) => "spnn",
            Self::Lstm(_) => "lstm",
            Self::GamFourier(_) => "gam_fourier",
        }
    }

    /// Fits on the last `train_days` days of `view.load`.
    pub fn fit(&self, view: &DataView, train_days: usize) -> Result<FittedModel> {
        let load = &view.load;
        let n_days = load.n_days();
        let window = |days: usize| -> Result<&[f64]> {
            if days == 0 || days > n_days {
                return Err(Error::history("days in the training window", days.max(1), n_days));
            }
            Ok(&load.values()[(n_days - days) * SLOTS_PER_DAY..])
        };
        Ok(match self {
            Self::Oracle => FittedModel::Oracle,
            Self::NSameDays(s) => FittedModel::Classic(ClassicModel::NSameDays(PersistenceConfig::same_days(s.n))),
            Self::NDays(s) => FittedModel::Classic(ClassicModel::NDays(PersistenceConfig::consecutive_days(s.n))),
            Self::Hw(cfg) => {
                let days = train_days.min(n_days);
                let fit = hw_fit(window(days)?, cfg)?;
                FittedModel::Classic(ClassicModel::Hw {
                    params: fit.params,
                    window_days: days,
                })
            }
            Self::Sarima(spec) => {
                let days = train_days.min(spec.max_train_days).min(n_days);
                let series = window(days)?;
                let order = if spec.candidates.is_empty() {
                    spec.order
                } else {
                    select_order(series, &spec.candidates, &spec.fit)?.order
                };
                let fit = fit_sarima(series, &order, &spec.fit)?;
                FittedModel::Classic(ClassicModel::Sarima {
                    params: fit.params,
                    window_days: days,
                })
            }
            Self::Par(cfg) => {
                if cfg.use_solar {
                    return Err(Error::config("par.use_solar", "use the `par_w` model for weather terms"));
                }
                FittedModel::Classic(ClassicModel::Par(fit_par(load, None, cfg, train_days)?))
            }
            Self::ParW(cfg) => {
                let cfg = ParConfig {
                    use_solar: true,
                    ..cfg.clone()
                };
                FittedModel::Classic(ClassicModel::ParW(fit_par(
                    load,
                    Some(view.weather()?),
                    &cfg,
                    train_days,
                )?))
            }
            Self::Spr(spec) => FittedModel::Classic(ClassicModel::Spr(fit_spr(
                load,
                &view.calendar,
                &spec.windows(),
                train_days,
                spec.ridge,
            )?)),
            Self::Spnn(cfg) => FittedModel::Spnn(fit_spnn(load, &view.calendar, cfg, train_days)?),
            Self::Lstm(cfg) => FittedModel::Lstm(lstm_train(load, cfg, train_days)?),
            Self::GamFourier(cfg) => {
                let mut config = cfg.clone();
                config.holidays.extend(view.calendar.holidays.iter().copied());
                let start = n_days.saturating_sub(train_days);
                let params = fit_gam(load, &config, start..n_days)?;
                FittedModel::Classic(ClassicModel::GamFourier { params, config })
            }
        })
    }
}

pub fn unknown_model(id: &str) -> Error {
    Error::UnknownModel {
        id: id.to_string(),
        valid: MODEL_IDS.join(", "),
    }
}

/// Fitted parameters of the models whose state is plain data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum ClassicModel {
    NSameDays(PersistenceConfig),
    NDays(PersistenceConfig),
    /// The state is rebuilt by filtering the last `window_days` days.
    Hw { params: HwParams, window_days: usize },
    /// Residuals are rebuilt from the last `window_days` days.
    Sarima { params: SarimaParams, window_days: usize },
    Par(ParWeights),
    ParW(ParWeights),
    Spr(SprModel),
    GamFourier { params: GamParams, config: GamConfig },
}

#[derive(Clone, Debug, PartialEq)]
pub enum FittedModel {
    Oracle,
    Classic(ClassicModel),
    Spnn(SpnnModel),
    Lstm(LstmParams),
}

fn tail_days(load: &LoadSeries, days: usize) -> Result<&[f64]> {
    let n = load.n_days();
    if days > n {
        return Err(Error::history("days of history", days, n));
    }
    Ok(&load.values()[(n - days) * SLOTS_PER_DAY..])
}

impl FittedModel {
    pub fn model_id(&self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::Classic(c) => match c {
                ClassicModel::NSameDays(_) => "n_same_days",
                ClassicModel::NDays(_) => "n_days",
                ClassicModel::Hw { .. } => "hw",
                ClassicModel::Sarima { .. } => "sarima",
                ClassicModel::Par(_) => "par",
                ClassicModel::ParW(_) => "par_w",
                ClassicModel::Spr(_) => "spr",
                ClassicModel::GamFourier { .. } => "gam_fourier",
            },
            Self::Spnn(_) => "spnn",
            Self::Lstm(_) => "lstm",
        }
    }

    /// Day-ahead forecast for `view.target_day()`.
    pub fn forecast(&self, view: &DataView) -> Result<DayForecast> {
        let load = &view.load;
        let d = view.target_day();
        let id = self.model_id();
        match self {
            Self::Oracle => Err(Error::Input(
                "the oracle is answered by the evaluation harness".into(),
            )),
            Self::Classic(c) => match c {
                ClassicModel::NSameDays(p) | ClassicModel::NDays(p) => DayForecast::new(id, d, p.predict(load, d)?),
                ClassicModel::Hw { params, window_days } => {
                    let (state, _) = hw_filter(tail_days(load, *window_days)?, params)?;
                    DayForecast::new(id, d, hw_forecast(&state, SLOTS_PER_DAY)?)
                }
                ClassicModel::Sarima { params, window_days } => {
                    let values = forecast_sarima(params, tail_days(load, *window_days)?, SLOTS_PER_DAY)?;
                    DayForecast::new(id, d, values)
                }
                ClassicModel::Par(w) => forecast_par(w, load, d),
                ClassicModel::ParW(w) => forecast_par_w(w, load, view.weather()?, d),
                ClassicModel::Spr(m) => forecast_spr(m, load, &view.calendar, d),
                ClassicModel::GamFourier { params, config } => forecast_gam(params, config, d),
            },
            Self::Spnn(m) => forecast_spnn(m, load, &view.calendar, d),
            Self::Lstm(p) => lstm_forecast(p, load, d),
        }
    }

    /// Serialised parameters: the binary network checkpoint for `spnn` and
    /// `lstm`, pretty JSON for everything else.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        match self {
            Self::Oracle => Err(Error::Input("the oracle has no parameters".into())),
            Self::Classic(c) => serde_json::to_vec_pretty(c).map_err(|e| Error::Format(e.to_string())),
            Self::Spnn(m) => encode_spnn(m),
            Self::Lstm(p) => encode_lstm(p),
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.starts_with(MAGIC) {
            return match Checkpoint::decode(bytes)?.kind.as_str() {
                "spnn" => Ok(Self::Spnn(decode_spnn(bytes)?)),
                "lstm" => Ok(Self::Lstm(decode_lstm(bytes)?)),
                k => Err(Error::Format(format!("checkpoint kind `{k}` is not a forecasting model"))),
            };
        }
        serde_json::from_slice(bytes)
            .map(Self::Classic)
            .map_err(|e| Error::Format(e.to_string()))
    }

    /// File extension matching [`Self::to_bytes`].
    pub fn file_extension(&self) -> &'static str {
        match self {
            Self::Spnn(_) | Self::Lstm(_) => "bin",
            _ => "json",
        }
    }
}
