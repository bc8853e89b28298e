//! SPNN: the SPR feature vector fed through an MLP.
//!
//! Every feature column and the target are min-max scaled with statistics
//! from the training window; the network predicts the scaled target.

use serde::{Deserialize, Serialize};

use super::checkpoint::{mlp_from_checkpoint, mlp_tensors, Checkpoint, Tensor};
use super::mlp::{mlp_forward, mlp_train, MlpParams, MlpTrainConfig};
use super::MinMax;
use crate::error::{Error, Result};
use crate::forecast::DayForecast;
use crate::regression::{build_spr_features, spr_training_set, SprThresholds, SprWindowConfig, SPR_FEATURES};
use crate::series::{Calendar, LoadSeries, SLOTS_PER_DAY};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpnnConfig {
    pub windows: SprWindowConfig,
    pub mlp: MlpTrainConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpnnModel {
    pub mlp: MlpParams,
    pub feature_norm: Vec<MinMax>,
    pub target_norm: MinMax,
    pub thresholds: SprThresholds,
    pub windows: SprWindowConfig,
}

impl SpnnModel {
    fn scaled(&self, f: &[f64; SPR_FEATURES]) -> Vec<f64> {
        f.iter().zip(&self.feature_norm).map(|(v, n)| n.normalize(*v)).collect()
    }
}

pub fn fit_spnn(
    history: &LoadSeries,
    calendar: &Calendar,
    config: &SpnnConfig,
    train_days: usize,
) -> Result<SpnnModel> {
    let (rows, targets, thresholds) = spr_training_set(history, calendar, &config.windows, train_days)?;
    if rows.is_empty() {
        return Err(Error::Input("no complete SPNN training rows".into()));
    }
    let feature_norm: Vec<MinMax> = (0..SPR_FEATURES)
        .map(|k| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            MinMax::fit(&col).expect("rows are finite")
        })
        .collect();
    let target_norm = MinMax::fit(&targets).expect("targets are finite");
    let mut model = SpnnModel {
        mlp: MlpParams::zeros(&[SPR_FEATURES, 1], config.mlp.activation)?,
        feature_norm,
        target_norm,
        thresholds,
        windows: config.windows.clone(),
    };
    let x: Vec<Vec<f64>> = rows.iter().map(|r| model.scaled(r)).collect();
    let y: Vec<f64> = targets.iter().map(|&v| target_norm.normalize(v)).collect();
    model.mlp = mlp_train(&x, &y, &config.mlp)?;
    Ok(model)
}

pub fn forecast_spnn(
    model: &SpnnModel,
    history: &LoadSeries,
    calendar: &Calendar,
    d: usize,
) -> Result<DayForecast> {
    let values = (0..SLOTS_PER_DAY)
        .map(|t| {
            let f = build_spr_features(history, calendar, d, t, &model.windows, &model.thresholds)?;
            let y = mlp_forward(&model.mlp, &model.scaled(&f))?;
            Ok(model.target_norm.denormalize(y))
        })
        .collect::<Result<Vec<f64>>>()?;
    DayForecast::new("spnn", d, values)
}

/// MLP tensors plus `feature_norm` `(15, 2)` rows of `[min, max]`,
/// `target_norm` `[min, max]`, `thresholds` `[low, high]` and `windows`
/// `[rs_window_slots, h_window_slots, low_q, high_q]`.
pub fn encode_spnn(m: &SpnnModel) -> Result<Vec<u8>> {
    let mut t = mlp_tensors(&m.mlp);
    t.push(Tensor::new(
        "feature_norm",
        vec![m.feature_norm.len(), 2],
        m.feature_norm.iter().flat_map(|n| [n.min, n.max]).collect(),
    ));
    t.push(Tensor::vector("target_norm", vec![m.target_norm.min, m.target_norm.max]));
    t.push(Tensor::vector("thresholds", vec![m.thresholds.low, m.thresholds.high]));
    let w = &m.windows;
    t.push(Tensor::vector(
        "windows",
        vec![w.rs_window_slots as f64, w.h_window_slots as f64, w.low_q, w.high_q],
    ));
    Checkpoint {
        kind: "spnn".into(),
        tensors: t,
    }
    .encode()
}

pub fn decode_spnn(bytes: &[u8]) -> Result<SpnnModel> {
    let c = Checkpoint::decode(bytes)?;
    if c.kind != "spnn" {
        return Err(Error::Format(format!("expected a `spnn` checkpoint, found `{}`", c.kind)));
    }
    let mlp = mlp_from_checkpoint(&c)?;
    let pair = |name: &str| -> Result<(f64, f64)> {
        match c.get(name)?.data[..] {
            [a, b] => Ok((a, b)),
            _ => Err(Error::Format(format!("`{name}` must hold two values"))),
        }
    };
    let fnorm = c.get("feature_norm")?;
    if fnorm.dims != [SPR_FEATURES, 2] || mlp.n_inputs() != SPR_FEATURES {
        return Err(Error::Format("SPNN checkpoint is not 15 features wide".into()));
    }
    let feature_norm = fnorm
        .data
        .chunks(2)
        .map(|p| MinMax { min: p[0], max: p[1] })
        .collect();
    let (min, max) = pair("target_norm")?;
    let (low, high) = pair("thresholds")?;
    let [rs, h, low_q, high_q] = c.get("windows")?.data[..] else {
        return Err(Error::Format("`windows` must hold four values".into()));
    };
    Ok(SpnnModel {
        mlp,
        feature_norm,
        target_norm: MinMax { min, max },
        thresholds: SprThresholds { low, high },
        windows: SprWindowConfig {
            rs_window_slots: rs as usize,
            h_window_slots: h as usize,
            low_q,
            high_q,
        },
    })
}
