//! From-scratch neural networks: a multilayer perceptron over the SPR
//! feature vector and a two-layer LSTM over stacked day vectors.
//!
//! Both are trained with Adam on mean squared error. Parameters live in
//! plain `f64` buffers so that gradient checking, optimisation and
//! checkpointing can walk them as a flat list of tensors.

pub mod checkpoint;
pub mod lstm;
pub mod mlp;
pub mod spnn;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use lstm::{lstm_cell, lstm_forecast, lstm_train, LstmConfig, LstmLayer, LstmParams};
pub use mlp::{mlp_forward, mlp_train, Activation, MlpParams, MlpTrainConfig};
pub use spnn::{fit_spnn, forecast_spnn, SpnnConfig, SpnnModel};

/// Anything whose parameters can be viewed as an ordered list of buffers.
pub trait Parameters {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// Overwrites all parameters from `flat` (same order as [`Self::to_flat`]).
    fn set_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moment accumulators for one parameter set.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    /// One bias-corrected Adam update of `params` using `grads` (same layout).
    pub fn update<P: Parameters>(&mut self, params: &mut P, grads: &P) {
        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let mut k = 0;
        for (p, g) in params.tensors_mut().into_iter().zip(grads.tensors()) {
            for (p, g) in p.iter_mut().zip(g) {
                let m = &mut self.m[k];
                let v = &mut self.v[k];
                *m = c.beta1 * *m + (1.0 - c.beta1) * g;
                *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
                *p -= c.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + c.epsilon);
                k += 1;
            }
        }
    }
}

/// Min-max scaling to [0, 1] with frozen statistics. A constant range maps
/// every value to 0.5.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    /// Statistics over the finite values of `data`.
    pub fn fit(data: &[f64]) -> Option<Self> {
        let mut it = data.iter().copied().filter(|v| v.is_finite());
        let first = it.next()?;
        let (min, max) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Some(Self { min, max })
    }

    pub fn normalize(&self, v: f64) -> f64 {
        if self.max > self.min {
            (v - self.min) / (self.max - self.min)
        } else {
            0.5
        }
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        if self.max > self.min {
            self.min + y * (self.max - self.min)
        } else {
            self.min
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

pub(crate) fn uniform_init(rng: &mut ChaCha8Rng, n: usize, fan_in: usize) -> Vec<f64> {
    let a = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.random_range(-a..a)).collect()
}

/// Maximum relative error between an analytic gradient and central finite
/// differences (step `1e-5`) over up to `n_samples` randomly chosen
/// parameters.
///
/// The relative error of one parameter is `|a − n| / max(|a|, |n|, 1e-6)`;
/// the floor keeps parameters with vanishing gradients from turning
/// round-off into huge ratios.
pub fn grad_check<P: Parameters + Clone>(
    params: &P,
    loss: impl Fn(&P) -> f64,
    analytic: &[f64],
    n_samples: usize,
    seed: u64,
) -> f64 {
    const STEP: f64 = 1e-5;
    let flat = params.to_flat();
    let mut idx: Vec<usize> = (0..flat.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
    idx.truncate(n_samples);
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for i in idx {
        let mut x = flat.clone();
        x[i] = flat[i] + STEP;
        probe.set_flat(&x);
        let up = loss(&probe);
        x[i] = flat[i] - STEP;
        probe.set_flat(&x);
        let down = loss(&probe);
        let numeric = (up - down) / (2.0 * STEP);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone)]
    struct Quad(Vec<f64>);

    impl Parameters for Quad {
        fn tensors(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn adam_minimises_quadratic() {
        let mut p = Quad(vec![3.0, -2.0]);
        let mut adam = AdamState::new(
            2,
            AdamConfig {
                learning_rate: 0.05,
                ..AdamConfig::default()
            },
        );
        for _ in 0..2000 {
            let g = Quad(p.0.iter().map(|x| 2.0 * (x - 1.0)).collect());
            adam.update(&mut p, &g);
        }
        assert!(p.0.iter().all(|x| (x - 1.0).abs() < 1e-3), "{:?}", p.0);
    }

    #[test]
    fn adam_first_step_is_learning_rate() {
        let mut p = Quad(vec![0.0]);
        let mut adam = AdamState::new(1, AdamConfig::default());
        adam.update(&mut p, &Quad(vec![123.0]));
        assert!((p.0[0] + 1e-3).abs() < 1e-9);
    }

    #[test]
    fn min_max_round_trip_and_constant() {
        let mm = MinMax::fit(&[2.0, 6.0, f64::NAN, 4.0]).unwrap();
        assert_eq!(mm.normalize(4.0), 0.5);
        assert_eq!(mm.denormalize(mm.normalize(5.0)), 5.0);
        let c = MinMax::fit(&[3.0, 3.0]).unwrap();
        assert_eq!(c.normalize(3.0), 0.5);
        assert_eq!(c.denormalize(0.9), 3.0);
        assert!(MinMax::fit(&[f64::NAN]).is_none());
    }

    #[test]
    fn grad_check_detects_wrong_gradient() {
        let p = Quad(vec![0.3, -0.7, 1.1]);
        let loss = |q: &Quad| q.0.iter().map(|x| x * x * x).sum::<f64>();
        let good: Vec<f64> = p.0.iter().map(|x| 3.0 * x * x).collect();
        assert!(grad_check(&p, loss, &good, 100, 1) < 1e-8);
        let bad: Vec<f64> = good.iter().map(|g| g * 1.01).collect();
        assert!(grad_check(&p, loss, &bad, 100, 1) > 1e-3);
    }
}
