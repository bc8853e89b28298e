//! Multilayer perceptron with one scalar output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{uniform_init, AdamConfig, AdamState, Parameters};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => f64::from(u8::from(a > 0.0)),
            Activation::Identity => 1.0,
        }
    }
}

/// Dense layers; `weights[l]` is row-major `(out, in)`. Hidden layers use
/// `activation`, the output layer is linear.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub activation: Activation,
}

impl Parameters for MlpParams {
    fn tensors(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
            .collect()
    }
}

impl MlpParams {
    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::shape("at least two non-zero layer sizes", format!("{layer_sizes:?}")));
        }
        if *layer_sizes.last().expect("checked length") != 1 {
            return Err(Error::shape("output width 1", layer_sizes[layer_sizes.len() - 1]));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights: layer_sizes.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect(),
            biases: layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            activation,
        })
    }

    /// Weights uniform in `±1/√fan_in`, zero biases.
    pub fn init(layer_sizes: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(layer_sizes, activation)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (w, fan) in p.weights.iter_mut().zip(layer_sizes) {
            *w = uniform_init(&mut rng, w.len(), *fan);
        }
        Ok(p)
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    fn check(&self) -> Result<()> {
        let consistent = self.layer_sizes.len() >= 2
            && self.weights.len() == self.layer_sizes.len() - 1
            && self.biases.len() == self.weights.len()
            && self.layer_sizes.windows(2).zip(&self.weights).all(|(s, w)| w.len() == s[0] * s[1])
            && self.layer_sizes[1..].iter().zip(&self.biases).all(|(&n, b)| b.len() == n)
            && self.layer_sizes.last() == Some(&1);
        if consistent {
            Ok(())
        } else {
            Err(Error::shape("consistent MLP tensors", format!("{:?}", self.layer_sizes)))
        }
    }

    /// Activations of every layer, input first.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n_layers = self.weights.len();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let input = &acts[l];
            let n_in = input.len();
            let act = if l + 1 == n_layers {
                Activation::Identity
            } else {
                self.activation
            };
            let out = b
                .iter()
                .enumerate()
                .map(|(j, bj)| {
                    let row = &w[j * n_in..(j + 1) * n_in];
                    let z = row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + bj;
                    act.apply(z)
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    /// Adds the gradient of `scale · (ŷ − y)²` at one example to `grads`;
    /// returns `(ŷ − y)²`.
    fn accumulate(&self, x: &[f64], y: f64, scale: f64, grads: &mut MlpParams) -> f64 {
        let acts = self.activations(x);
        let n_layers = self.weights.len();
        let err = acts[n_layers][0] - y;
        let mut delta = vec![2.0 * scale * err];
        for l in (0..n_layers).rev() {
            let input = &acts[l];
            let n_in = input.len();
            let gw = &mut grads.weights[l];
            for (j, dj) in delta.iter().enumerate() {
                grads.biases[l][j] += dj;
                for (k, xk) in input.iter().enumerate() {
                    gw[j * n_in + k] += dj * xk;
                }
            }
            if l > 0 {
                let w = &self.weights[l];
                delta = (0..n_in)
                    .map(|k| {
                        let back: f64 = delta.iter().enumerate().map(|(j, dj)| dj * w[j * n_in + k]).sum();
                        back * self.activation.derivative(input[k])
                    })
                    .collect();
            }
        }
        err * err
    }

    /// Mean squared error and its gradient over a data set.
    pub fn loss_and_grad(&self, rows: &[Vec<f64>], targets: &[f64]) -> (f64, MlpParams) {
        let mut grads = self.zeroed();
        let scale = 1.0 / rows.len() as f64;
        let mut sse = 0.0;
        for (x, &y) in rows.iter().zip(targets) {
            sse += self.accumulate(x, y, scale, &mut grads);
        }
        (sse * scale, grads)
    }

    pub fn loss(&self, rows: &[Vec<f64>], targets: &[f64]) -> f64 {
        rows.iter()
            .zip(targets)
            .map(|(x, y)| (self.activations(x).last().expect("output layer")[0] - y).powi(2))
            .sum::<f64>()
            / rows.len() as f64
    }

    fn zeroed(&self) -> MlpParams {
        let mut g = self.clone();
        g.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        g
    }
}

/// Network output for one feature vector.
pub fn mlp_forward(params: &MlpParams, x: &[f64]) -> Result<f64> {
    params.check()?;
    if x.len() != params.n_inputs() {
        return Err(Error::shape(format!("{} inputs", params.n_inputs()), x.len()));
    }
    Ok(params.activations(x).last().expect("output layer")[0])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpTrainConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for MlpTrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32],
            activation: Activation::Tanh,
            epochs: 300,
            seed: 0,
            adam: AdamConfig {
                learning_rate: 1e-2,
                ..AdamConfig::default()
            },
        }
    }
}

/// Full-batch Adam on mean squared error. Returns the parameters and the
/// loss before each epoch's update.
pub fn mlp_train_with_history(
    rows: &[Vec<f64>],
    targets: &[f64],
    config: &MlpTrainConfig,
) -> Result<(MlpParams, Vec<f64>)> {
    if rows.is_empty() {
        return Err(Error::Input("no training rows".into()));
    }
    if rows.len() != targets.len() {
        return Err(Error::shape(format!("{} targets", rows.len()), targets.len()));
    }
    let width = rows[0].len();
    if let Some(r) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::shape(format!("{width} features per row"), r.len()));
    }
    if rows.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::Input("training data contains non-finite values".into()));
    }
    let mut sizes = vec![width];
    sizes.extend(&config.hidden);
    sizes.push(1);
    let mut params = MlpParams::init(&sizes, config.activation, config.seed)?;
    let mut adam = AdamState::new(params.n_params(), config.adam);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, grads) = params.loss_and_grad(rows, targets);
        if !loss.is_finite() {
            return Err(Error::NanLoss {
                epoch,
                learning_rate: config.adam.learning_rate,
            });
        }
        history.push(loss);
        adam.update(&mut params, &grads);
    }
    if params.to_flat().iter().any(|v| !v.is_finite()) {
        return Err(Error::NanLoss {
            epoch: config.epochs,
            learning_rate: config.adam.learning_rate,
        });
    }
    Ok((params, history))
}

pub fn mlp_train(rows: &[Vec<f64>], targets: &[f64], config: &MlpTrainConfig) -> Result<MlpParams> {
    mlp_train_with_history(rows, targets, config).map(|(p, _)| p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::grad_check;
    use rand::Rng;

    fn random_rows(n: usize, width: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..width).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = MlpParams::zeros(&[15, 4, 1], Activation::Tanh).unwrap();
        assert_eq!(mlp_forward(&p, &[3.0; 15]).unwrap(), 0.0);
    }

    #[test]
    fn single_layer_is_dot_product() {
        let mut p = MlpParams::zeros(&[3, 1], Activation::Tanh).unwrap();
        p.weights[0] = vec![1.0, -2.0, 0.5];
        assert_eq!(mlp_forward(&p, &[2.0, 1.0, 4.0]).unwrap(), 2.0);
    }

    #[test]
    fn forward_matches_hand_evaluation() {
        let p = MlpParams::init(&[15, 4, 1], Activation::Tanh, 42).unwrap();
        let x: Vec<f64> = (0..15).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut out = p.biases[1][0];
        for j in 0..4 {
            let mut z = p.biases[0][j];
            for k in 0..15 {
                z += p.weights[0][j * 15 + k] * x[k];
            }
            out += p.weights[1][j] * z.tanh();
        }
        assert!((mlp_forward(&p, &x).unwrap() - out).abs() < 1e-10);
    }

    #[test]
    fn shape_errors() {
        let p = MlpParams::zeros(&[15, 4, 1], Activation::Tanh).unwrap();
        assert!(matches!(mlp_forward(&p, &[0.0; 14]), Err(Error::Shape { .. })));
        assert!(MlpParams::zeros(&[3, 2], Activation::Tanh).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let rows = random_rows(8, 5, 1);
        let targets: Vec<f64> = rows.iter().map(|r| r[0] * r[1] - r[2]).collect();
        let p = MlpParams::init(&[5, 6, 4, 1], Activation::Tanh, 3).unwrap();
        let (_, g) = p.loss_and_grad(&rows, &targets);
        let err = grad_check(&p, |q| q.loss(&rows, &targets), &g.to_flat(), 100, 7);
        assert!(err < 1e-4, "{err}");

        let lin = MlpParams::init(&[5, 1], Activation::Identity, 4).unwrap();
        let (_, g) = lin.loss_and_grad(&rows, &targets);
        let err = grad_check(&lin, |q| q.loss(&rows, &targets), &g.to_flat(), 100, 7);
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn learns_linear_map() {
        let rows = random_rows(200, 15, 5);
        let targets: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(i, v)| v * (i as f64 - 7.0) / 10.0).sum::<f64>() + 0.3)
            .collect();
        let cfg = MlpTrainConfig {
            hidden: vec![],
            activation: Activation::Identity,
            epochs: 500,
            ..MlpTrainConfig::default()
        };
        let (p, hist) = mlp_train_with_history(&rows, &targets, &cfg).unwrap();
        assert!(p.loss(&rows, &targets) < 1e-6, "{}", hist.last().unwrap());
    }

    #[test]
    fn learns_xor() {
        let rows = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let targets = [0.0, 1.0, 1.0, 0.0];
        let cfg = MlpTrainConfig {
            hidden: vec![8],
            epochs: 1000,
            ..MlpTrainConfig::default()
        };
        let p = mlp_train(&rows, &targets, &cfg).unwrap();
        assert!(p.loss(&rows, &targets) < 0.05);
    }

    #[test]
    fn training_is_deterministic() {
        let rows = random_rows(30, 4, 6);
        let targets: Vec<f64> = rows.iter().map(|r| r[0].sin()).collect();
        let cfg = MlpTrainConfig {
            epochs: 50,
            ..MlpTrainConfig::default()
        };
        assert_eq!(
            mlp_train(&rows, &targets, &cfg).unwrap(),
            mlp_train(&rows, &targets, &cfg).unwrap()
        );
    }

    #[test]
    fn divergence_reports_learning_rate() {
        let rows = random_rows(10, 3, 8);
        let targets = vec![1e300; 10];
        let cfg = MlpTrainConfig {
            epochs: 5,
            ..MlpTrainConfig::default()
        };
        match mlp_train(&rows, &targets, &cfg) {
            Err(Error::NanLoss { learning_rate, .. }) => assert_eq!(learning_rate, 1e-2),
            other => panic!("{other:?}"),
        }
    }
}
