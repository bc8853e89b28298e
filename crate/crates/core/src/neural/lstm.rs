//! Two-layer LSTM over a sequence of day vectors with a dense sigmoid head.
//!
//! An example is `steps` consecutive days (each a 96-vector, min-max
//! normalised) and its target is the following day. Gate pre-activations are
//! `W_x x_t + W_h h_{t−1} + b` with the four gates stacked in the order
//! forget, input, candidate, output. The head maps the last hidden state of
//! the top layer through a sigmoid, so a zero network predicts the
//! normalisation midpoint.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{uniform_init, AdamConfig, AdamState, MinMax, Parameters};
use crate::error::{Error, Result};
use crate::forecast::DayForecast;
use crate::series::{LoadSeries, SLOTS_PER_DAY};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    pub input: usize,
    pub hidden: usize,
    /// `(4·hidden, input)`.
    pub wx: DMatrix<f64>,
    /// `(4·hidden, hidden)`.
    pub wh: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LstmLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            wx: DMatrix::zeros(4 * hidden, input),
            wh: DMatrix::zeros(4 * hidden, hidden),
            b: DVector::zeros(4 * hidden),
        }
    }

    /// Bias slice of one gate: 0 forget, 1 input, 2 candidate, 3 output.
    pub fn gate_bias_mut(&mut self, gate: usize) -> &mut [f64] {
        let h = self.hidden;
        &mut self.b.as_mut_slice()[gate * h..(gate + 1) * h]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams {
    pub layers: Vec<LstmLayer>,
    /// `(output, top hidden)`.
    pub head_w: DMatrix<f64>,
    pub head_b: DVector<f64>,
    /// Sequence length in days.
    pub steps: usize,
    pub norm: MinMax,
}

impl Parameters for LstmParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            t.extend([l.wx.as_slice(), l.wh.as_slice(), l.b.as_slice()]);
        }
        t.push(self.head_w.as_slice());
        t.push(self.head_b.as_slice());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            t.push(l.wx.as_mut_slice());
            t.push(l.wh.as_mut_slice());
            t.push(l.b.as_mut_slice());
        }
        t.push(self.head_w.as_mut_slice());
        t.push(self.head_b.as_mut_slice());
        t
    }
}

impl LstmParams {
    /// All-zero network: `input → hidden[0] → … → output`.
    pub fn zeros(input: usize, hidden: &[usize], output: usize, steps: usize) -> Result<Self> {
        if input == 0 || output == 0 || steps == 0 || hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::shape(
                "non-zero widths, at least one recurrent layer and one step",
                format!("input {input}, hidden {hidden:?}, output {output}, steps {steps}"),
            ));
        }
        let mut layers = Vec::with_capacity(hidden.len());
        let mut prev = input;
        for &h in hidden {
            layers.push(LstmLayer::zeros(prev, h));
            prev = h;
        }
        Ok(Self {
            layers,
            head_w: DMatrix::zeros(output, prev),
            head_b: DVector::zeros(output),
            steps,
            norm: MinMax { min: 0.0, max: 1.0 },
        })
    }

    /// Weights uniform in `±1/√fan_in` (fan-in of a gate is `input + hidden`),
    /// zero biases.
    pub fn init(input: usize, hidden: &[usize], output: usize, steps: usize, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(input, hidden, output, steps)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &mut p.layers {
            let fan = l.input + l.hidden;
            let wx = uniform_init(&mut rng, l.wx.len(), fan);
            l.wx.as_mut_slice().copy_from_slice(&wx);
            let wh = uniform_init(&mut rng, l.wh.len(), fan);
            l.wh.as_mut_slice().copy_from_slice(&wh);
        }
        let hw = uniform_init(&mut rng, p.head_w.len(), p.head_w.ncols());
        p.head_w.as_mut_slice().copy_from_slice(&hw);
        Ok(p)
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input
    }

    pub fn output_width(&self) -> usize {
        self.head_w.nrows()
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.hidden).collect()
    }

    fn zeroed(&self) -> Self {
        let mut g = self.clone();
        g.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
        g
    }

    fn check(&self) -> Result<()> {
        let mut prev = self.input_width();
        for l in &self.layers {
            let h = l.hidden;
            if l.input != prev
                || l.wx.shape() != (4 * h, l.input)
                || l.wh.shape() != (4 * h, h)
                || l.b.len() != 4 * h
            {
                return Err(Error::shape("consistent LSTM gate tensors", format!("layer {h}")));
            }
            prev = h;
        }
        if self.head_w.ncols() != prev || self.head_b.len() != self.head_w.nrows() {
            return Err(Error::shape("consistent head tensors", format!("{:?}", self.head_w.shape())));
        }
        Ok(())
    }
}

/// One step of a single LSTM layer for one example.
pub fn lstm_cell(
    layer: &LstmLayer,
    h_prev: &DVector<f64>,
    c_prev: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let h = layer.hidden;
    if h_prev.len() != h || c_prev.len() != h {
        return Err(Error::shape(format!("state width {h}"), h_prev.len().max(c_prev.len())));
    }
    if x.len() != layer.input {
        return Err(Error::shape(format!("input width {}", layer.input), x.len()));
    }
    let z = &layer.wx * x + &layer.wh * h_prev + &layer.b;
    let f = z.rows(0, h).map(sigmoid);
    let i = z.rows(h, h).map(sigmoid);
    let g = z.rows(2 * h, h).map(f64::tanh);
    let o = z.rows(3 * h, h).map(sigmoid);
    let c = f.component_mul(c_prev) + i.component_mul(&g);
    let h_new = o.component_mul(&c.map(f64::tanh));
    Ok((h_new, c))
}

struct StepCache {
    x: DMatrix<f64>,
    h_prev: DMatrix<f64>,
    c_prev: DMatrix<f64>,
    f: DMatrix<f64>,
    i: DMatrix<f64>,
    g: DMatrix<f64>,
    o: DMatrix<f64>,
    tanh_c: DMatrix<f64>,
}

fn add_bias(z: &mut DMatrix<f64>, b: &DVector<f64>) {
    for mut col in z.column_iter_mut() {
        col += b;
    }
}

fn layer_forward(layer: &LstmLayer, xs: &[DMatrix<f64>]) -> (Vec<DMatrix<f64>>, Vec<StepCache>) {
    let hd = layer.hidden;
    let batch = xs[0].ncols();
    let mut h = DMatrix::zeros(hd, batch);
    let mut c = DMatrix::zeros(hd, batch);
    let mut hs = Vec::with_capacity(xs.len());
    let mut caches = Vec::with_capacity(xs.len());
    for x in xs {
        let mut z = &layer.wx * x;
        z.gemm(1.0, &layer.wh, &h, 1.0);
        add_bias(&mut z, &layer.b);
        let f = z.rows(0, hd).map(sigmoid);
        let i = z.rows(hd, hd).map(sigmoid);
        let g = z.rows(2 * hd, hd).map(f64::tanh);
        let o = z.rows(3 * hd, hd).map(sigmoid);
        let c_new = f.component_mul(&c) + i.component_mul(&g);
        let tanh_c = c_new.map(f64::tanh);
        let h_new = o.component_mul(&tanh_c);
        caches.push(StepCache {
            x: x.clone(),
            h_prev: std::mem::replace(&mut h, h_new.clone()),
            c_prev: std::mem::replace(&mut c, c_new),
            f,
            i,
            g,
            o,
            tanh_c,
        });
        hs.push(h_new);
    }
    (hs, caches)
}

/// Backpropagation through time for one layer. `dh_ext[t]` is the loss
/// gradient arriving at `h_t` from above; returns the gradients at the
/// layer inputs.
fn layer_backward(
    layer: &LstmLayer,
    caches: &[StepCache],
    dh_ext: &[DMatrix<f64>],
    grads: &mut LstmLayer,
) -> Vec<DMatrix<f64>> {
    let hd = layer.hidden;
    let batch = caches[0].x.ncols();
    let mut dh_next = DMatrix::zeros(hd, batch);
    let mut dc_next = DMatrix::zeros(hd, batch);
    let mut dxs = vec![DMatrix::zeros(0, 0); caches.len()];
    let mut dz = DMatrix::zeros(4 * hd, batch);
    for t in (0..caches.len()).rev() {
        let s = &caches[t];
        let dh = &dh_ext[t] + &dh_next;
        let mut dc = dc_next;
        for k in 0..dc.len() {
            let tc = s.tanh_c[k];
            dc[k] += dh[k] * s.o[k] * (1.0 - tc * tc);
        }
        for col in 0..batch {
            for r in 0..hd {
                let k = (r, col);
                let (f, i, g, o) = (s.f[k], s.i[k], s.g[k], s.o[k]);
                let dck = dc[k];
                dz[(r, col)] = dck * s.c_prev[k] * f * (1.0 - f);
                dz[(hd + r, col)] = dck * g * i * (1.0 - i);
                dz[(2 * hd + r, col)] = dck * i * (1.0 - g * g);
                dz[(3 * hd + r, col)] = dh[k] * s.tanh_c[k] * o * (1.0 - o);
            }
        }
        grads.wx.gemm(1.0, &dz, &s.x.transpose(), 1.0);
        grads.wh.gemm(1.0, &dz, &s.h_prev.transpose(), 1.0);
        for col in dz.column_iter() {
            grads.b += col;
        }
        dxs[t] = layer.wx.tr_mul(&dz);
        dh_next = layer.wh.tr_mul(&dz);
        dc = dc.component_mul(&s.f);
        dc_next = dc;
    }
    dxs
}

impl LstmParams {
    /// Normalised outputs `(output, batch)` for a batch of sequences; each
    /// element of `xs` is one time step `(input, batch)`.
    pub fn forward(&self, xs: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        self.check()?;
        if xs.is_empty() || xs.iter().any(|x| x.nrows() != self.input_width() || x.ncols() != xs[0].ncols()) {
            return Err(Error::shape(
                format!("steps of {} rows with equal batch size", self.input_width()),
                xs.first().map(|x| x.nrows()).unwrap_or(0),
            ));
        }
        let mut seq = xs.to_vec();
        for layer in &self.layers {
            seq = layer_forward(layer, &seq).0;
        }
        Ok(self.head(seq.last().expect("non-empty sequence")))
    }

    fn head(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = &self.head_w * h;
        add_bias(&mut z, &self.head_b);
        z.map(sigmoid)
    }

    /// Mean squared error over all outputs of the batch and its gradient.
    pub fn loss_and_grad(&self, xs: &[DMatrix<f64>], targets: &DMatrix<f64>) -> (f64, LstmParams) {
        let mut seq = xs.to_vec();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (hs, cache) = layer_forward(layer, &seq);
            caches.push(cache);
            seq = hs;
        }
        let h_last = seq.last().expect("non-empty sequence");
        let y = self.head(h_last);
        let scale = 1.0 / y.len() as f64;
        let diff = &y - targets;
        let loss = diff.norm_squared() * scale;

        let mut grads = self.zeroed();
        let dz = DMatrix::from_fn(y.nrows(), y.ncols(), |r, c| {
            let yv = y[(r, c)];
            2.0 * scale * diff[(r, c)] * yv * (1.0 - yv)
        });
        grads.head_w.gemm(1.0, &dz, &h_last.transpose(), 0.0);
        for col in dz.column_iter() {
            grads.head_b += col;
        }
        let batch = y.ncols();
        let top = self.layers.last().expect("at least one layer").hidden;
        let mut dh_ext: Vec<DMatrix<f64>> = vec![DMatrix::zeros(top, batch); xs.len()];
        dh_ext[xs.len() - 1] = self.head_w.tr_mul(&dz);
        for (l, layer) in self.layers.iter().enumerate().rev() {
            dh_ext = layer_backward(layer, &caches[l], &dh_ext, &mut grads.layers[l]);
        }
        (loss, grads)
    }

    pub fn loss(&self, xs: &[DMatrix<f64>], targets: &DMatrix<f64>) -> f64 {
        match self.forward(xs) {
            Ok(y) => (&y - targets).norm_squared() / y.len() as f64,
            Err(_) => f64::NAN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmConfig {
    pub hidden: Vec<usize>,
    /// Days per input sequence.
    pub steps: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            hidden: vec![5 * SLOTS_PER_DAY, 3 * SLOTS_PER_DAY],
            steps: 10,
            epochs: 40,
            batch_size: 16,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

/// Input sequence for target day `d`: days `d−steps..d`, normalised, as
/// `steps` column vectors.
fn sequence(values: &[f64], norm: &MinMax, d: usize, steps: usize) -> Vec<Vec<f64>> {
    (d - steps..d)
        .map(|day| {
            values[day * SLOTS_PER_DAY..(day + 1) * SLOTS_PER_DAY]
                .iter()
                .map(|&v| norm.normalize(v))
                .collect()
        })
        .collect()
}

fn batch_inputs(seqs: &[&Vec<Vec<f64>>], steps: usize) -> Vec<DMatrix<f64>> {
    (0..steps)
        .map(|t| {
            DMatrix::from_fn(SLOTS_PER_DAY, seqs.len(), |r, c| seqs[c][t][r])
        })
        .collect()
}

/// Trains on every complete `steps → 1` day window whose target lies in the
/// last `train_days` days of `data`. Returns the parameters and the mean
/// training loss of each epoch.
pub fn lstm_train_with_history(
    data: &LoadSeries,
    config: &LstmConfig,
    train_days: usize,
) -> Result<(LstmParams, Vec<f64>)> {
    if config.batch_size == 0 {
        return Err(Error::config("lstm.batch_size", "must be at least 1"));
    }
    let steps = config.steps;
    let n_days = data.n_days();
    let first = steps.max(n_days.saturating_sub(train_days));
    if n_days < steps + 1 || first >= n_days {
        return Err(Error::history("training days", steps + 1, n_days));
    }
    let values = data.values();
    let window = &values[(first - steps) * SLOTS_PER_DAY..];
    let norm = MinMax::fit(window).ok_or_else(|| Error::Input("no observed training values".into()))?;

    let mut examples = Vec::new();
    for d in first..n_days {
        let span = &values[(d - steps) * SLOTS_PER_DAY..(d + 1) * SLOTS_PER_DAY];
        if span.iter().all(|v| v.is_finite()) {
            let target: Vec<f64> = span[steps * SLOTS_PER_DAY..].iter().map(|&v| norm.normalize(v)).collect();
            examples.push((sequence(values, &norm, d, steps), target));
        }
    }
    if examples.is_empty() {
        return Err(Error::Input("no complete training windows".into()));
    }

    let mut params = LstmParams::init(SLOTS_PER_DAY, &config.hidden, SLOTS_PER_DAY, steps, config.seed)?;
    params.norm = norm;
    let mut adam = AdamState::new(params.n_params(), config.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let seqs: Vec<&Vec<Vec<f64>>> = chunk.iter().map(|&k| &examples[k].0).collect();
            let xs = batch_inputs(&seqs, steps);
            let targets = DMatrix::from_fn(SLOTS_PER_DAY, chunk.len(), |r, c| examples[chunk[c]].1[r]);
            let (loss, grads) = params.loss_and_grad(&xs, &targets);
            if !loss.is_finite() {
                return Err(Error::NanLoss {
                    epoch,
                    learning_rate: config.adam.learning_rate,
                });
            }
            total += loss * chunk.len() as f64;
            adam.update(&mut params, &grads);
        }
        history.push(total / examples.len() as f64);
    }
    Ok((params, history))
}

pub fn lstm_train(data: &LoadSeries, config: &LstmConfig, train_days: usize) -> Result<LstmParams> {
    lstm_train_with_history(data, config, train_days).map(|(p, _)| p)
}

/// Forecast for day `d` from days `d−steps..d` of `history`.
pub fn lstm_forecast(params: &LstmParams, history: &LoadSeries, d: usize) -> Result<DayForecast> {
    let steps = params.steps;
    if params.input_width() != SLOTS_PER_DAY || params.output_width() != SLOTS_PER_DAY {
        return Err(Error::shape(
            "96-wide input and output",
            format!("{} / {}", params.input_width(), params.output_width()),
        ));
    }
    if d < steps {
        return Err(Error::history("days before the target day", steps, d));
    }
    if history.n_days() < d {
        return Err(Error::history("days in history", d, history.n_days()));
    }
    let values = history.values();
    let span = &values[(d - steps) * SLOTS_PER_DAY..d * SLOTS_PER_DAY];
    if span.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("missing samples in the input window".into()));
    }
    let seq = sequence(values, &params.norm, d, steps);
    let xs = batch_inputs(&[&seq], steps);
    let y = params.forward(&xs)?;
    DayForecast::new("lstm", d, y.iter().map(|&v| params.norm.denormalize(v)).collect())
}
