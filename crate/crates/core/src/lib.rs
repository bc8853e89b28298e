//! Day-ahead electricity-load forecasting for residential buildings and
//! their aggregated community.
//!
//! Every model produces 96 quarter-hour values for the day after the last
//! day of data it is shown. The crate bundles persistence baselines,
//! Holt-Winters, seasonal ARIMA, persistence-based regressions (PAR, PAR-W,
//! SPR), from-scratch neural networks (SPNN, LSTM), a Fourier additive
//! model, a synthetic data generator and a rolling-origin evaluation
//! harness.

pub mod error;
pub mod evaluation;
pub mod forecast;
pub mod gam;
pub mod holt_winters;
pub mod models;
pub mod neural;
pub mod ols;
pub mod optim;
pub mod persistence;
pub mod regression;
pub mod sarima;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
pub use forecast::DayForecast;
pub use series::{LoadSeries, WeatherSeries, SLOTS_PER_DAY};
