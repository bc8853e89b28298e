//! The day-ahead forecast value type produced by every model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::SLOTS_PER_DAY;

/// 96 predicted values for one target day from one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayForecast {
    pub model_id: String,
    /// Last day of data the forecast may depend on (`target_day - 1`).
    pub origin_day: usize,
    pub target_day: usize,
    pub values: Vec<f64>,
}

impl DayForecast {
    pub fn new(model_id: impl Into<String>, target_day: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != SLOTS_PER_DAY {
            return Err(Error::shape(
                format!("{SLOTS_PER_DAY} forecast values"),
                values.len(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite forecast value {v}")));
        }
        if target_day == 0 {
            return Err(Error::history("forecast origin", 1, 0));
        }
        Ok(Self {
            model_id: model_id.into(),
            origin_day: target_day - 1,
            target_day,
            values,
        })
    }
}
